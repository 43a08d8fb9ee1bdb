#include "hmtl/relation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hmtl/error.hpp"

namespace hmtl {

const std::vector<std::string>& ace05_relation_types() {
  static const std::vector<std::string> kTypes = {"ART",       "GEN-AFF", "ORG-AFF",
                                                  "PART-WHOLE", "PER-SOC", "PHYS"};
  return kTypes;
}

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Vector score_pair(const Vector& g_i, const Vector& g_j, const RelationWeights& weights) {
  const auto l = weights.u.cols();
  if (g_i.size() != l || g_j.size() != l || weights.w.cols() != l ||
      weights.w.rows() != weights.u.rows() || weights.b.size() != weights.u.rows() ||
      weights.v.cols() != weights.u.rows()) {
    throw DimensionError("score_pair: dimension mismatch");
  }
  Vector h = (weights.u * g_j + weights.w * g_i + weights.b.transpose()).cwiseMax(0.0);
  Vector t = weights.v * h;
  return t.unaryExpr([](double x) { return sigmoid(x); });
}

double relation_loss(const Matrix& probabilities, const Matrix& targets) {
  if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols()) {
    throw DimensionError("relation_loss: shape mismatch");
  }
  constexpr double kEps = 1e-12;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities(i), kEps, 1.0 - kEps);
    loss -= targets(i) * std::log(p) + (1.0 - targets(i)) * std::log(1.0 - p);
  }
  return loss;
}

double relation_loss_logits(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw DimensionError("relation_loss: shape mismatch");
  }
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double x = logits(i);
    loss += std::max(x, 0.0) - x * targets(i) + std::log1p(std::exp(-std::abs(x)));
  }
  return loss;
}

std::vector<RelationPrediction> decode_relations(const std::vector<std::pair<int, int>>& pairs,
                                                 const Matrix& probabilities,
                                                 const std::vector<int>& head_lasts,
                                                 double threshold,
                                                 const std::vector<std::string>& types) {
  if (probabilities.rows() != static_cast<Eigen::Index>(pairs.size()) ||
      probabilities.cols() != static_cast<Eigen::Index>(types.size())) {
    throw DimensionError("decode_relations: shape mismatch");
  }
  const std::set<int> heads(head_lasts.begin(), head_lasts.end());
  std::set<RelationPrediction> seen;
  std::vector<RelationPrediction> out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a1, a2] = pairs[p];
    if (!heads.count(a1) || !heads.count(a2)) continue;
    for (std::size_t k = 0; k < types.size(); ++k) {
      const double prob = probabilities(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
      if (prob <= threshold) continue;
      RelationPrediction r{types[k], a1, a2, prob};
      RelationPrediction key{types[k], a1, a2, 0.0};
      if (seen.insert(key).second) out.push_back(r);
    }
  }
  return out;
}

std::vector<std::pair<int, int>> candidate_pairs(const std::vector<int>& positions) {
  std::vector<int> sorted(positions);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::pair<int, int>> out;
  for (int i : sorted) {
    for (int j : sorted) {
      if (i != j) out.emplace_back(i, j);
    }
  }
  return out;
}

Matrix relation_targets(const std::vector<std::pair<int, int>>& pairs,
                        const std::vector<RelationInstance>& gold, int offset,
                        const std::vector<std::string>& types) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(pairs.size()), static_cast<Eigen::Index>(types.size()));
  for (const auto& r : gold) {
    auto k = std::find(types.begin(), types.end(), r.type);
    if (k == types.end()) continue;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (pairs[p].first + offset == r.arg1.end && pairs[p].second + offset == r.arg2.end) {
        t(static_cast<Eigen::Index>(p), k - types.begin()) = 1.0;
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------

RelationHead RelationHead::create(ParameterStore& store, const std::string& prefix, Group group,
                                  int input_dim, std::vector<std::string> types, Options options,
                                  Rng& rng) {
  if (types.empty()) throw ConfigError("re.types", "relation type set is empty");
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw ConfigError("re.threshold", "must be in (0, 1)");
  }
  RelationHead head;
  head.types_ = std::move(types);
  head.options_ = options;
  const int d = options.hidden;
  const int r = static_cast<int>(head.types_.size());
  head.u_ = &store.add(prefix + ".U", group, glorot_matrix(d, input_dim, rng));
  head.w_ = &store.add(prefix + ".W", group, glorot_matrix(d, input_dim, rng));
  head.b_ = &store.add(prefix + ".b", group, Matrix::Zero(1, d));
  head.v_ = &store.add(prefix + ".V", group, glorot_matrix(r, d, rng));
  return head;
}

RelationWeights RelationHead::weights() const {
  return RelationWeights{u_->value, w_->value, b_->value.row(0), v_->value};
}

Var RelationHead::logits(Tape& tape, Var tokens, const std::vector<std::pair<int, int>>& pairs) const {
  if (tape.value(tokens).cols() != u_->value.cols()) throw DimensionError("relation: token width mismatch");
  std::vector<int> first, second;
  for (const auto& [i, j] : pairs) {
    first.push_back(i);
    second.push_back(j);
  }
  Var as_second = ops::matmul_nt(tape, tokens, tape.param(*u_));  // n x d
  Var as_first = ops::add_row(tape, ops::matmul_nt(tape, tokens, tape.param(*w_)), tape.param(*b_));
  Var hidden = ops::relu(tape, ops::add(tape, ops::gather_rows(tape, as_first, std::move(first)),
                                        ops::gather_rows(tape, as_second, std::move(second))));
  return ops::matmul_nt(tape, hidden, tape.param(*v_));
}

Var RelationHead::loss(Tape& tape, Var logits, const Matrix& targets) const {
  return bce_with_logits(tape, logits, targets);
}

Var bce_with_logits(Tape& tape, Var logits, const Matrix& targets) {
  const Matrix& x = tape.value(logits);
  Matrix out(1, 1);
  out(0, 0) = relation_loss_logits(x, targets);
  Matrix grad = x.unaryExpr([](double v) { return sigmoid(v); }) - targets;
  return tape.record(std::move(out), {logits}, [logits, grad = std::move(grad)](Tape& tp, const Matrix& g) {
    tp.accumulate(logits, g(0, 0) * grad);
  });
}

}  // namespace hmtl
