#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/corpus.hpp"

namespace hmtl {

// The ACE05 relation inventory.
const std::vector<std::string>& ace05_relation_types();

// t(i, j) = V relu(U g_j + W g_i + b), p = sigmoid(t). Token i is the first
// argument, j the second.
struct RelationWeights {
  Matrix u;       // d x l
  Matrix w;       // d x l
  RowVector b;    // d
  Matrix v;       // r x d
};

Vector score_pair(const Vector& g_i, const Vector& g_j, const RelationWeights& weights);

// Summed binary cross-entropy; probabilities are clamped to [1e-12, 1 - 1e-12].
double relation_loss(const Matrix& probabilities, const Matrix& targets);
// Same loss from logits, in the numerically stable form.
double relation_loss_logits(const Matrix& logits, const Matrix& targets);

// Scored relation between two document token positions.
struct RelationPrediction {
  std::string type;
  int arg1_last = 0;
  int arg2_last = 0;
  double probability = 0.0;
  auto operator<=>(const RelationPrediction&) const = default;
};

// Emits one prediction per (pair, type) with p > threshold, provided both
// tokens are in `head_lasts`. Exact duplicates are dropped.
std::vector<RelationPrediction> decode_relations(const std::vector<std::pair<int, int>>& pairs,
                                                 const Matrix& probabilities,
                                                 const std::vector<int>& head_lasts,
                                                 double threshold,
                                                 const std::vector<std::string>& types);

// Ordered pairs (i, j), i != j, of the given (sentence-relative) positions.
std::vector<std::pair<int, int>> candidate_pairs(const std::vector<int>& positions);

// Gold 0/1 targets over candidate pairs, keyed by argument last tokens.
// `offset` maps sentence positions to document positions.
Matrix relation_targets(const std::vector<std::pair<int, int>>& pairs,
                        const std::vector<RelationInstance>& gold, int offset,
                        const std::vector<std::string>& types);

class RelationHead {
 public:
  struct Options {
    int hidden = 64;
    double threshold = 0.5;
  };

  static RelationHead create(ParameterStore& store, const std::string& prefix, Group group,
                             int input_dim, std::vector<std::string> types, Options options,
                             Rng& rng);

  const std::vector<std::string>& types() const { return types_; }
  const Options& options() const { return options_; }
  void set_threshold(double t) { options_.threshold = t; }
  RelationWeights weights() const;

  // Logits for every pair over the sentence encoding `tokens` (n x l).
  Var logits(Tape& tape, Var tokens, const std::vector<std::pair<int, int>>& pairs) const;
  Var loss(Tape& tape, Var logits, const Matrix& targets) const;

 private:
  std::vector<std::string> types_;
  Options options_;
  Parameter* u_ = nullptr;
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  Parameter* v_ = nullptr;
};

// Fused sigmoid + summed binary cross-entropy.
Var bce_with_logits(Tape& tape, Var logits, const Matrix& targets);

}  // namespace hmtl
