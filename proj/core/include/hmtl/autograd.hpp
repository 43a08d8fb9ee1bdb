#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmtl/task.hpp"

namespace hmtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

// A trainable tensor. Biases and vectors are stored as 1 x d matrices.
struct Parameter {
  std::string name;
  Group group = Group::kEmbeddings;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  std::int64_t steps = 0;
  bool trainable = true;
  // Lookup tables receive row-sparse gradients and row-sparse updates.
  bool row_sparse = false;
  bool touched = false;
  std::vector<int> touched_rows;

  void zero_grad();
  void mark_row(int row);
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

// Owns every parameter of a model. Addresses are stable for the lifetime of
// the store, so modules keep raw pointers into it.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(std::string name, Group group, Matrix init, bool row_sparse = false);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::size_t scalar_count() const;

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  explicit Var(int id) : id_(id) {}
  int id() const { return id_; }
  bool valid() const { return id_ >= 0; }

 private:
  int id_ = -1;
};

// Reverse-mode tape. Every op appends a node holding its value and, when
// gradients are enabled and some input requires them, a backward closure.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value);
  // Leaf reading the full parameter. Frozen parameters become constants.
  Var param(Parameter& p);
  // Gathers rows of a lookup table; gradients scatter back row-sparsely.
  Var lookup(Parameter& table, std::vector<int> rows);

  // Appends an op node. `backward` is dropped when no input requires grad.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);
  // Node whose backward writes straight into parameters (fused ops).
  Var record_with_params(Matrix value, std::span<const Var> inputs, bool params_need_grad,
                         Backward backward);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  void accumulate(Var v, const Matrix& g);
  // Gradient of the last backward() target w.r.t. v; empty if unreached.
  const Matrix& grad(Var v) const { return nodes_[v.id()].grad; }

  // Seeds d(target)/d(target) = 1 for a 1x1 target and runs the tape.
  void backward(Var target);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  bool grad_enabled_;
};

// Marks a parameter as having received gradient.
void touch(Parameter& p);

namespace ops {

Var matmul(Tape& t, Var a, Var b);
// a * b^T, with b stored as out x in (the usual weight layout).
Var matmul_nt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
// Adds a 1 x d row to every row of x.
Var add_row(Tape& t, Var x, Var row);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);
Var tanh(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var sum(Tape& t, Var a);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var concat_rows(Tape& t, std::span<const Var> parts);
Var slice_rows(Tape& t, Var a, int begin, int count);
Var gather_rows(Tape& t, Var a, std::vector<int> rows);
// Inverted dropout; identity when p == 0.
Var dropout(Tape& t, Var a, double p, Rng& rng);
// x W^T + b for W: out x in, b: 1 x out.
Var affine(Tape& t, Var x, Parameter& weight, Parameter& bias);

}  // namespace ops

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
};

// Adam over the parameters touched since the last step. Untouched
// parameters (and untouched rows of lookup tables) are left bit-identical.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  const AdamConfig& config() const { return config_; }
  // Clips the global gradient norm, updates, then clears gradients. Returns
  // the pre-clipping norm.
  double step(ParameterStore& store);

 private:
  AdamConfig config_;
};

// Small deterministic initialisers.
Matrix uniform_matrix(int rows, int cols, double scale, Rng& rng);
// Glorot-style uniform bound sqrt(6 / (fan_in + fan_out)).
Matrix glorot_matrix(int rows, int cols, Rng& rng);

}  // namespace hmtl
