#include "hmtl/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "hmtl/error.hpp"

namespace hmtl {

BilouTagset::BilouTagset(std::vector<std::string> labels) : labels_(std::move(labels)) {}

int BilouTagset::tag(Prefix prefix, std::string_view label) const {
  if (prefix == Prefix::kO) return kOutside;
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw std::invalid_argument("unknown label '" + std::string(label) + "'");
  const int k = static_cast<int>(it - labels_.begin());
  return 1 + 4 * k + (static_cast<int>(prefix) - 1);
}

BilouTagset::Prefix BilouTagset::prefix(int tag) const {
  if (tag == kOutside) return Prefix::kO;
  return static_cast<Prefix>((tag - 1) % 4 + 1);
}

int BilouTagset::label_index(int tag) const { return tag == kOutside ? -1 : (tag - 1) / 4; }

const std::string& BilouTagset::label(int tag) const {
  static const std::string kNone;
  return tag == kOutside ? kNone : labels_[static_cast<std::size_t>(label_index(tag))];
}

std::string BilouTagset::tag_name(int tag) const {
  static constexpr const char* kPrefixes[] = {"O", "B-", "I-", "L-", "U-"};
  if (tag == kOutside) return "O";
  return kPrefixes[static_cast<int>(prefix(tag))] + label(tag);
}

int BilouTagset::parse(std::string_view name) const {
  if (name == "O") return kOutside;
  if (name.size() < 3 || name[1] != '-') throw std::invalid_argument("bad tag " + std::string(name));
  Prefix p;
  switch (name[0]) {
    case 'B': p = Prefix::kB; break;
    case 'I': p = Prefix::kI; break;
    case 'L': p = Prefix::kL; break;
    case 'U': p = Prefix::kU; break;
    default: throw std::invalid_argument("bad tag prefix " + std::string(name));
  }
  return tag(p, name.substr(2));
}

bool BilouTagset::allowed_start(int tag) const {
  Prefix p = prefix(tag);
  return p != Prefix::kI && p != Prefix::kL;
}

bool BilouTagset::allowed_end(int tag) const {
  Prefix p = prefix(tag);
  return p != Prefix::kB && p != Prefix::kI;
}

bool BilouTagset::allowed_transition(int from, int to) const {
  Prefix pf = prefix(from);
  Prefix pt = prefix(to);
  const bool inside = pf == Prefix::kB || pf == Prefix::kI;
  if (inside) {
    return (pt == Prefix::kI || pt == Prefix::kL) && label_index(from) == label_index(to);
  }
  return pt == Prefix::kO || pt == Prefix::kB || pt == Prefix::kU;
}

std::vector<int> spans_to_tags(const std::vector<TaggedSpan>& spans, int n,
                               const BilouTagset& tagset) {
  using P = BilouTagset::Prefix;
  std::vector<int> tags(static_cast<std::size_t>(n), BilouTagset::kOutside);
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  for (const auto& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= n) {
      throw std::invalid_argument("span out of range");
    }
    for (int t = s.start; t <= s.end; ++t) {
      if (covered[static_cast<std::size_t>(t)]) throw std::invalid_argument("overlapping spans");
      covered[static_cast<std::size_t>(t)] = true;
    }
    if (s.start == s.end) {
      tags[static_cast<std::size_t>(s.start)] = tagset.tag(P::kU, s.label);
      continue;
    }
    tags[static_cast<std::size_t>(s.start)] = tagset.tag(P::kB, s.label);
    for (int t = s.start + 1; t < s.end; ++t) {
      tags[static_cast<std::size_t>(t)] = tagset.tag(P::kI, s.label);
    }
    tags[static_cast<std::size_t>(s.end)] = tagset.tag(P::kL, s.label);
  }
  return tags;
}

std::vector<TaggedSpan> tags_to_spans(std::span<const int> tags, const BilouTagset& tagset) {
  using P = BilouTagset::Prefix;
  std::vector<TaggedSpan> out;
  std::optional<TaggedSpan> open;
  auto close = [&](int end) {
    if (!open) return;
    open->end = end;
    out.push_back(*open);
    open.reset();
  };
  const int n = static_cast<int>(tags.size());
  for (int t = 0; t < n; ++t) {
    const int tag = tags[static_cast<std::size_t>(t)];
    switch (tagset.prefix(tag)) {
      case P::kO:
        close(t - 1);
        break;
      case P::kU:
        close(t - 1);
        out.push_back({t, t, tagset.label(tag)});
        break;
      case P::kB:
        close(t - 1);
        open = TaggedSpan{t, t, tagset.label(tag)};
        break;
      case P::kI:
        if (!open) open = TaggedSpan{t, t, tagset.label(tag)};
        break;
      case P::kL:
        if (open) {
          close(t);
        } else {
          out.push_back({t, t, tagset.label(tag)});
        }
        break;
    }
  }
  close(n - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

double logsumexp(const RowVector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

void check_shapes(const Matrix& e, const CrfWeights& w) {
  const auto k = e.cols();
  if (e.rows() < 1) throw DimensionError("crf: empty sequence");
  if (w.transitions.rows() != k || w.transitions.cols() != k || w.start.size() != k ||
      w.stop.size() != k) {
    throw DimensionError("crf: weight shapes do not match the tag count");
  }
}

// alpha(t, j): log-sum of prefix scores ending in tag j at position t.
Matrix forward_scores(const Matrix& e, const CrfWeights& w) {
  const int n = static_cast<int>(e.rows());
  const int k = static_cast<int>(e.cols());
  Matrix alpha(n, k);
  alpha.row(0) = w.start + e.row(0);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      RowVector cand = alpha.row(t - 1) + w.transitions.col(j).transpose();
      alpha(t, j) = logsumexp(cand) + e(t, j);
    }
  }
  return alpha;
}

// beta(t, i): log-sum of suffix scores after being in tag i at position t.
Matrix backward_scores(const Matrix& e, const CrfWeights& w) {
  const int n = static_cast<int>(e.rows());
  const int k = static_cast<int>(e.cols());
  Matrix beta(n, k);
  beta.row(n - 1) = w.stop;
  for (int t = n - 2; t >= 0; --t) {
    RowVector next = e.row(t + 1) + beta.row(t + 1);
    for (int i = 0; i < k; ++i) beta(t, i) = logsumexp(w.transitions.row(i) + next);
  }
  return beta;
}

}  // namespace

double log_partition(const Matrix& emissions, const CrfWeights& w) {
  check_shapes(emissions, w);
  Matrix alpha = forward_scores(emissions, w);
  return logsumexp(alpha.row(alpha.rows() - 1) + w.stop);
}

double sequence_score(const Matrix& emissions, const CrfWeights& w, std::span<const int> tags) {
  check_shapes(emissions, w);
  if (static_cast<Eigen::Index>(tags.size()) != emissions.rows()) {
    throw DimensionError("crf: tag sequence length mismatch");
  }
  // Same association order as the forward pass so single-path cases agree
  // bit for bit.
  double s = w.start(tags[0]) + emissions(0, tags[0]);
  for (std::size_t t = 1; t < tags.size(); ++t) {
    s = s + w.transitions(tags[t - 1], tags[t]);
    s = s + emissions(static_cast<int>(t), tags[t]);
  }
  return s + w.stop(tags.back());
}

double crf_nll(const Matrix& emissions, const CrfWeights& w, std::span<const int> gold) {
  return log_partition(emissions, w) - sequence_score(emissions, w, gold);
}

std::vector<int> viterbi(const Matrix& emissions, const CrfWeights& w) {
  check_shapes(emissions, w);
  const int n = static_cast<int>(emissions.rows());
  const int k = static_cast<int>(emissions.cols());
  Matrix delta(n, k);
  Eigen::MatrixXi back(n, k);
  delta.row(0) = w.start + emissions.row(0);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      int best = 0;
      double best_score = delta(t - 1, 0) + w.transitions(0, j);
      for (int i = 1; i < k; ++i) {
        const double s = delta(t - 1, i) + w.transitions(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      delta(t, j) = best_score + emissions(t, j);
      back(t, j) = best;
    }
  }
  int last = 0;
  double best_final = delta(n - 1, 0) + w.stop(0);
  for (int j = 1; j < k; ++j) {
    const double s = delta(n - 1, j) + w.stop(j);
    if (s > best_final) {
      best_final = s;
      last = j;
    }
  }
  std::vector<int> path(static_cast<std::size_t>(n));
  path[static_cast<std::size_t>(n - 1)] = last;
  for (int t = n - 1; t > 0; --t) {
    path[static_cast<std::size_t>(t - 1)] = back(t, path[static_cast<std::size_t>(t)]);
  }
  return path;
}

CrfGradient crf_nll_gradient(const Matrix& emissions, const CrfWeights& w,
                             std::span<const int> gold) {
  check_shapes(emissions, w);
  const int n = static_cast<int>(emissions.rows());
  const int k = static_cast<int>(emissions.cols());
  Matrix alpha = forward_scores(emissions, w);
  Matrix beta = backward_scores(emissions, w);
  const double log_z = logsumexp(alpha.row(n - 1) + w.stop);

  CrfGradient g;
  g.nll = log_z - sequence_score(emissions, w, gold);
  g.emissions = ((alpha + beta).array() - log_z).exp().matrix();
  g.transitions = Matrix::Zero(k, k);
  for (int t = 0; t + 1 < n; ++t) {
    RowVector next = emissions.row(t + 1) + beta.row(t + 1);
    for (int i = 0; i < k; ++i) {
      g.transitions.row(i) +=
          ((alpha(t, i) + w.transitions.row(i).array() + next.array()) - log_z).exp().matrix();
    }
  }
  g.start = g.emissions.row(0);
  g.stop = g.emissions.row(n - 1);

  g.start(gold[0]) -= 1.0;
  g.stop(gold.back()) -= 1.0;
  for (int t = 0; t < n; ++t) {
    g.emissions(t, gold[static_cast<std::size_t>(t)]) -= 1.0;
    if (t > 0) g.transitions(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= 1.0;
  }
  return g;
}

CrfWeights mask_invalid(const CrfWeights& w, const BilouTagset& tagset) {
  CrfWeights out = w;
  const int k = tagset.size();
  for (int i = 0; i < k; ++i) {
    if (!tagset.allowed_start(i)) out.start(i) = kForbiddenScore;
    if (!tagset.allowed_end(i)) out.stop(i) = kForbiddenScore;
    for (int j = 0; j < k; ++j) {
      if (!tagset.allowed_transition(i, j)) out.transitions(i, j) = kForbiddenScore;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Head

CrfHead CrfHead::create(ParameterStore& store, const std::string& prefix, Group group,
                        int input_dim, BilouTagset tagset, Rng& rng) {
  CrfHead head;
  head.tagset_ = std::move(tagset);
  const int k = head.tagset_.size();
  head.proj_weight_ = &store.add(prefix + ".emission.weight", group, glorot_matrix(k, input_dim, rng));
  head.proj_bias_ = &store.add(prefix + ".emission.bias", group, Matrix::Zero(1, k));
  head.transitions_ = &store.add(prefix + ".transitions", group, Matrix::Zero(k, k));
  head.start_ = &store.add(prefix + ".start", group, Matrix::Zero(1, k));
  head.stop_ = &store.add(prefix + ".stop", group, Matrix::Zero(1, k));
  return head;
}

CrfWeights CrfHead::weights() const {
  return CrfWeights{transitions_->value, start_->value.row(0), stop_->value.row(0)};
}

Var CrfHead::emissions(Tape& tape, Var features) const {
  return ops::affine(tape, features, *proj_weight_, *proj_bias_);
}

Var CrfHead::nll(Tape& tape, Var emissions, std::vector<int> gold) const {
  const Matrix& e = tape.value(emissions);
  if (static_cast<Eigen::Index>(gold.size()) != e.rows()) {
    throw DimensionError("crf: gold length does not match the sentence");
  }
  CrfGradient grad = crf_nll_gradient(e, weights(), gold);
  Matrix out(1, 1);
  out(0, 0) = grad.nll;
  Parameter* trans = transitions_;
  Parameter* start = start_;
  Parameter* stop = stop_;
  std::vector<Var> inputs = {emissions};
  return tape.record_with_params(
      std::move(out), inputs, trans->trainable,
      [emissions, trans, start, stop, grad = std::move(grad)](Tape& tp, const Matrix& g) {
        const double s = g(0, 0);
        tp.accumulate(emissions, s * grad.emissions);
        trans->grad += s * grad.transitions;
        start->grad.row(0) += s * grad.start;
        stop->grad.row(0) += s * grad.stop;
        trans->touched = start->touched = stop->touched = true;
      });
}

std::vector<int> CrfHead::decode(const Matrix& emissions, bool constrained) const {
  CrfWeights w = weights();
  return viterbi(emissions, constrained ? mask_invalid(w, tagset_) : w);
}

}  // namespace hmtl
