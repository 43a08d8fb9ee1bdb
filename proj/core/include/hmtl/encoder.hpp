#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/task.hpp"

namespace hmtl {

// Multi-layer bidirectional LSTM. Output row t is [forward h_t ; backward h_t]
// of the top layer. Gate layout inside the 4h blocks is (input, forget,
// cell candidate, output).
class BiRecurrentEncoder {
 public:
  static BiRecurrentEncoder create(ParameterStore& store, const std::string& prefix, Group group,
                                   int input_dim, int hidden, int layers, Rng& rng);

  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }
  int layers() const { return static_cast<int>(layers_.size()); }
  int output_dim() const { return 2 * hidden_; }

  // `dropout` is applied to the encoder input only (training passes an rng).
  Var encode(Tape& tape, Var inputs, double dropout = 0.0, Rng* rng = nullptr) const;

  struct Direction {
    Parameter* w_input;      // 4h x d_in
    Parameter* w_recurrent;  // 4h x h
    Parameter* bias;         // 1 x 4h
  };
  const std::vector<std::array<Direction, 2>>& parameters() const { return layers_; }

 private:
  int input_dim_ = 0;
  int hidden_ = 0;
  std::vector<std::array<Direction, 2>> layers_;
};

// Gradient-free wrapper around BiRecurrentEncoder::encode.
Matrix encode(const BiRecurrentEncoder& encoder, const Matrix& inputs);

// The LSTM recurrence over pre-projected inputs x W^T + b (n x 4h). Runs
// right-to-left when `reverse` is set; rows stay in sentence order.
Var lstm_recurrence(Tape& tape, Var projected, Parameter& w_recurrent, bool reverse);

// A representation an encoder can consume: the shared embeddings g_e or the
// output of another task's encoder.
enum class Source { kEmbeddings, kNer, kEmd, kCoref, kRelation };

std::string_view source_name(Source source);
Source source_of(Task task);

// Task levels plus the input concatenation list of every task encoder.
class HierarchyWiring {
 public:
  HierarchyWiring() = default;

  // Levels are listed bottom-up. Each encoder's default input is g_e followed
  // by the outputs of every task on the nearest lower level.
  static HierarchyWiring from_levels(std::vector<std::vector<Task>> levels);
  // "ner|emd|re,cr": '|' separates levels, ',' separates tasks in a level.
  static HierarchyWiring parse(std::string_view spec);
  static HierarchyWiring full_model();

  void set_inputs(Task task, std::vector<Source> inputs);

  bool has(Task task) const;
  // 1-based level; throws for tasks not in the wiring.
  int level(Task task) const;
  const std::vector<Source>& inputs(Task task) const;
  const std::vector<std::vector<Task>>& levels() const { return levels_; }
  std::vector<Task> tasks() const;
  // Tasks whose encoders feed `task`, directly or transitively.
  std::vector<Task> dependencies(Task task) const;

  // Throws ConfigError unless every input references g_e or a task on a
  // strictly lower level.
  void validate() const;
  std::string to_string() const;

 private:
  std::vector<std::vector<Task>> levels_;
  std::map<Task, std::vector<Source>> inputs_;
};

}  // namespace hmtl
