#include "hmtl/coref.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "hmtl/error.hpp"
#include "hmtl/relation.hpp"

namespace hmtl {

std::vector<SpanBounds> enumerate_spans(int n, int max_width) {
  if (max_width < 1) throw std::invalid_argument("max_width must be at least 1");
  std::vector<SpanBounds> out;
  for (int s = 0; s < n; ++s) {
    for (int e = s; e < n && e - s < max_width; ++e) out.push_back({s, e});
  }
  return out;
}

std::vector<int> prune_mentions(const std::vector<SpanBounds>& spans,
                                std::span<const double> scores, double ratio, int n) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("prune ratio must be in (0, 1]");
  if (scores.size() != spans.size()) throw DimensionError("prune_mentions: score count mismatch");
  const auto budget = static_cast<std::size_t>(std::ceil(ratio * n - 1e-9));
  std::vector<int> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return spans[a] < spans[b];
  });
  order.resize(std::min(budget, order.size()));
  std::sort(order.begin(), order.end(), [&](int a, int b) { return spans[a] < spans[b]; });
  return order;
}

int bucket(int value) {
  if (value <= 1) return 0;
  if (value <= 4) return value - 1;
  if (value <= 7) return 4;
  if (value <= 15) return 5;
  if (value <= 31) return 6;
  if (value <= 63) return 7;
  return 8;
}

double CorefScores::score(std::size_t k) const {
  const auto [i, j] = pairs[k];
  return mention(i) + mention(j) + pair(static_cast<Eigen::Index>(k));
}

std::pair<std::size_t, std::size_t> CorefScores::antecedent_range(int i) const {
  auto lo = std::lower_bound(pairs.begin(), pairs.end(), std::pair<int, int>{i, -1});
  auto hi = std::lower_bound(pairs.begin(), pairs.end(), std::pair<int, int>{i + 1, -1});
  return {static_cast<std::size_t>(lo - pairs.begin()), static_cast<std::size_t>(hi - pairs.begin())};
}

std::vector<std::pair<int, int>> antecedent_pairs(int span_count, int max_antecedents) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < span_count; ++i) {
    for (int j = std::max(0, i - max_antecedents); j < i; ++j) out.emplace_back(i, j);
  }
  return out;
}

std::vector<double> antecedent_probabilities(const CorefScores& scores, int i) {
  const auto [lo, hi] = scores.antecedent_range(i);
  std::vector<double> s = {0.0};
  for (std::size_t k = lo; k < hi; ++k) s.push_back(scores.score(k));
  const double m = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double& v : s) z += (v = std::exp(v - m));
  for (double& v : s) v /= z;
  return s;
}

std::vector<int> gold_cluster_ids(const std::vector<SpanBounds>& spans,
                                  const std::vector<Cluster>& clusters) {
  std::map<SpanBounds, int> lookup;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (const auto& m : clusters[c]) lookup[{m.start, m.end}] = static_cast<int>(c);
  }
  std::vector<int> ids;
  ids.reserve(spans.size());
  for (const auto& s : spans) {
    auto it = lookup.find(s);
    ids.push_back(it == lookup.end() ? -1 : it->second);
  }
  return ids;
}

CorefGradient coref_loss_gradient(const CorefScores& scores, std::span<const int> cluster_ids) {
  const int k = static_cast<int>(scores.spans.size());
  if (static_cast<int>(cluster_ids.size()) != k || scores.mention.size() != k ||
      scores.pair.size() != static_cast<Eigen::Index>(scores.pairs.size())) {
    throw DimensionError("coref_loss: inconsistent score sizes");
  }
  CorefGradient g;
  g.mention = Vector::Zero(k);
  g.pair = Vector::Zero(static_cast<Eigen::Index>(scores.pairs.size()));
  for (int i = 0; i < k; ++i) {
    const auto [lo, hi] = scores.antecedent_range(i);
    const std::size_t c = hi - lo + 1;
    std::vector<double> s(c, 0.0);
    std::vector<bool> gold(c, false);
    bool any_gold = false;
    for (std::size_t a = lo; a < hi; ++a) {
      s[a - lo + 1] = scores.score(a);
      const int j = scores.pairs[a].second;
      if (cluster_ids[i] >= 0 && cluster_ids[static_cast<std::size_t>(j)] == cluster_ids[i]) {
        gold[a - lo + 1] = any_gold = true;
      }
    }
    if (!any_gold) gold[0] = true;

    const double m_all = *std::max_element(s.begin(), s.end());
    double m_gold = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < c; ++a) {
      if (gold[a]) m_gold = std::max(m_gold, s[a]);
    }
    double z_all = 0.0, z_gold = 0.0;
    for (std::size_t a = 0; a < c; ++a) {
      z_all += std::exp(s[a] - m_all);
      if (gold[a]) z_gold += std::exp(s[a] - m_gold);
    }
    const double log_all = m_all + std::log(z_all);
    const double log_gold = m_gold + std::log(z_gold);
    g.loss += log_all - log_gold;

    for (std::size_t a = 1; a < c; ++a) {
      const double p = std::exp(s[a] - log_all);
      const double q = gold[a] ? std::exp(s[a] - log_gold) : 0.0;
      const double d = p - q;
      const std::size_t pk = lo + a - 1;
      g.pair(static_cast<Eigen::Index>(pk)) += d;
      g.mention(i) += d;
      g.mention(scores.pairs[pk].second) += d;
    }
  }
  return g;
}

double coref_loss(const CorefScores& scores, std::span<const int> cluster_ids) {
  return coref_loss_gradient(scores, cluster_ids).loss;
}

std::vector<Cluster> decode_clusters(const CorefScores& scores) {
  const int k = static_cast<int>(scores.spans.size());
  std::vector<int> parent(static_cast<std::size_t>(k));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  };
  for (int i = 0; i < k; ++i) {
    const auto [lo, hi] = scores.antecedent_range(i);
    double best = 0.0;
    int best_j = -1;
    for (std::size_t a = lo; a < hi; ++a) {
      const double s = scores.score(a);
      if (s > best) {
        best = s;
        best_j = scores.pairs[a].second;
      }
    }
    if (best_j >= 0) parent[static_cast<std::size_t>(find(i))] = find(best_j);
  }
  std::map<int, Cluster> groups;
  for (int i = 0; i < k; ++i) {
    const auto& s = scores.spans[static_cast<std::size_t>(i)];
    groups[find(i)].push_back(TaggedSpan{s.start, s.end, ""});
  }
  std::vector<Cluster> out;
  for (auto& [root, c] : groups) {
    if (c.size() < 2) continue;
    std::sort(c.begin(), c.end());
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SpanBounds> mention_bounds(const std::vector<Cluster>& clusters) {
  std::vector<SpanBounds> out;
  for (const auto& c : clusters) {
    for (const auto& m : c) out.push_back({m.start, m.end});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------

Var span_attention(Tape& tape, Var tokens, Var logits, const std::vector<SpanBounds>& spans) {
  const Matrix& g = tape.value(tokens);
  const Matrix& a = tape.value(logits);
  if (a.rows() != g.rows() || a.cols() != 1) throw DimensionError("span_attention: logits must be n x 1");
  const int d = static_cast<int>(g.cols());
  Matrix out(static_cast<int>(spans.size()), d);
  std::vector<Vector> weights;
  weights.reserve(spans.size());
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto& s = spans[k];
    Vector w = a.col(0).segment(s.start, s.width());
    w = (w.array() - w.maxCoeff()).exp();
    w /= w.sum();
    out.row(static_cast<int>(k)) = w.transpose() * g.middleRows(s.start, s.width());
    weights.push_back(std::move(w));
  }
  return tape.record(
      std::move(out), {tokens, logits},
      [tokens, logits, spans, weights = std::move(weights)](Tape& tp, const Matrix& grad) {
        const Matrix& gv = tp.value(tokens);
        Matrix d_tokens = Matrix::Zero(gv.rows(), gv.cols());
        Matrix d_logits = Matrix::Zero(gv.rows(), 1);
        for (std::size_t k = 0; k < spans.size(); ++k) {
          const auto& s = spans[k];
          const Vector& w = weights[k];
          const RowVector gk = grad.row(static_cast<int>(k));
          d_tokens.middleRows(s.start, s.width()) += w * gk;
          Vector dots = gv.middleRows(s.start, s.width()) * gk.transpose();
          const double mean = w.dot(dots);
          d_logits.col(0).segment(s.start, s.width()) += (w.array() * (dots.array() - mean)).matrix();
        }
        tp.accumulate(tokens, d_tokens);
        tp.accumulate(logits, d_logits);
      });
}

CorefHead::Ffnn CorefHead::make_ffnn(ParameterStore& store, const std::string& prefix, Group group,
                                     int in, int hidden, Rng& rng) {
  Ffnn f{};
  f.w1 = &store.add(prefix + ".w1", group, glorot_matrix(hidden, in, rng));
  f.b1 = &store.add(prefix + ".b1", group, Matrix::Zero(1, hidden));
  f.w2 = &store.add(prefix + ".w2", group, glorot_matrix(1, hidden, rng));
  f.b2 = &store.add(prefix + ".b2", group, Matrix::Zero(1, 1));
  return f;
}

Var CorefHead::apply(Tape& tape, const Ffnn& f, Var x) {
  Var h = ops::relu(tape, ops::affine(tape, x, *f.w1, *f.b1));
  return ops::affine(tape, h, *f.w2, *f.b2);
}

CorefHead CorefHead::create(ParameterStore& store, const std::string& prefix, Group group,
                            int input_dim, CorefOptions options, Rng& rng) {
  if (options.max_width < 1) throw ConfigError("coref.max_width", "must be at least 1");
  if (!(options.prune_ratio > 0.0 && options.prune_ratio <= 1.0)) {
    throw ConfigError("coref.prune_ratio", "must be in (0, 1]");
  }
  CorefHead head;
  head.options_ = options;
  head.input_dim_ = input_dim;
  head.attention_w_ = &store.add(prefix + ".attention.weight", group, glorot_matrix(1, input_dim, rng));
  head.attention_b_ = &store.add(prefix + ".attention.bias", group, Matrix::Zero(1, 1));
  head.width_table_ = &store.add(prefix + ".width_embedding", group,
                                 uniform_matrix(kNumBuckets, options.feature_dim, 0.1, rng), true);
  head.distance_table_ = &store.add(prefix + ".distance_embedding", group,
                                    uniform_matrix(kNumBuckets, options.feature_dim, 0.1, rng), true);
  head.mention_ffnn_ = make_ffnn(store, prefix + ".mention", group, head.span_dim(), options.hidden, rng);
  head.pair_ffnn_ = make_ffnn(store, prefix + ".pair", group,
                              3 * head.span_dim() + options.feature_dim, options.hidden, rng);
  return head;
}

Var CorefHead::span_representations(Tape& tape, Var tokens, const std::vector<SpanBounds>& spans) const {
  if (tape.value(tokens).cols() != input_dim_) throw DimensionError("coref: token width mismatch");
  std::vector<int> starts, ends, widths;
  for (const auto& s : spans) {
    starts.push_back(s.start);
    ends.push_back(s.end);
    widths.push_back(bucket(s.width()));
  }
  Var logits = ops::affine(tape, tokens, *attention_w_, *attention_b_);
  const std::vector<Var> parts = {
      ops::gather_rows(tape, tokens, std::move(starts)),
      ops::gather_rows(tape, tokens, std::move(ends)),
      span_attention(tape, tokens, logits, spans),
      tape.lookup(*width_table_, std::move(widths)),
  };
  return ops::concat_cols(tape, parts);
}

CorefHead::Forward CorefHead::forward(Tape& tape, Var tokens,
                                      const std::vector<SpanBounds>* gold_mentions) const {
  const int n = static_cast<int>(tape.value(tokens).rows());
  Forward out;
  std::vector<SpanBounds> candidates =
      gold_mentions ? *gold_mentions : enumerate_spans(n, options_.max_width);
  if (candidates.empty()) {
    out.scores.mention = Vector::Zero(0);
    out.scores.pair = Vector::Zero(0);
    return out;
  }
  Var reprs = span_representations(tape, tokens, candidates);
  Var mention = apply(tape, mention_ffnn_, reprs);
  out.candidate_mention = mention;

  std::vector<int> kept;
  if (gold_mentions) {
    kept.resize(candidates.size());
    std::iota(kept.begin(), kept.end(), 0);
  } else {
    const Matrix& m = tape.value(mention);
    kept = prune_mentions(candidates, std::span<const double>(m.data(), static_cast<std::size_t>(m.rows())),
                          options_.prune_ratio, n);
  }
  for (int k : kept) out.scores.spans.push_back(candidates[static_cast<std::size_t>(k)]);
  out.candidates = std::move(candidates);
  Var kept_reprs = ops::gather_rows(tape, reprs, kept);
  out.mention = ops::gather_rows(tape, mention, kept);
  out.scores.mention = tape.value(out.mention).col(0);

  out.scores.pairs = antecedent_pairs(static_cast<int>(kept.size()), options_.max_antecedents);
  if (out.scores.pairs.empty()) {
    out.scores.pair = Vector::Zero(0);
    return out;
  }
  std::vector<int> anaphors, antecedents, distances;
  for (const auto& [i, j] : out.scores.pairs) {
    anaphors.push_back(i);
    antecedents.push_back(j);
    distances.push_back(bucket(out.scores.spans[static_cast<std::size_t>(i)].start -
                               out.scores.spans[static_cast<std::size_t>(j)].start));
  }
  Var ri = ops::gather_rows(tape, kept_reprs, std::move(anaphors));
  Var rj = ops::gather_rows(tape, kept_reprs, std::move(antecedents));
  const std::vector<Var> parts = {ri, rj, ops::mul(tape, ri, rj),
                                  tape.lookup(*distance_table_, std::move(distances))};
  out.pair = apply(tape, pair_ffnn_, ops::concat_cols(tape, parts));
  out.scores.pair = tape.value(out.pair).col(0);
  return out;
}

Var CorefHead::loss(Tape& tape, const Forward& forward, const std::vector<Cluster>& gold) const {
  Var detection;
  if (options_.mention_loss_weight > 0.0 && !forward.candidates.empty()) {
    const std::vector<int> ids = gold_cluster_ids(forward.candidates, gold);
    Matrix targets(static_cast<Eigen::Index>(ids.size()), 1);
    for (std::size_t k = 0; k < ids.size(); ++k) targets(static_cast<Eigen::Index>(k), 0) = ids[k] >= 0 ? 1.0 : 0.0;
    detection = ops::scale(tape, bce_with_logits(tape, forward.candidate_mention, targets),
                           options_.mention_loss_weight);
  }
  Var antecedents = antecedent_loss(tape, forward, gold);
  return detection.valid() ? ops::add(tape, antecedents, detection) : antecedents;
}

Var CorefHead::antecedent_loss(Tape& tape, const Forward& forward, const std::vector<Cluster>& gold) const {
  if (forward.scores.pairs.empty()) return tape.constant(Matrix::Zero(1, 1));
  std::vector<int> ids = gold_cluster_ids(forward.scores.spans, gold);
  CorefGradient g = coref_loss_gradient(forward.scores, ids);
  Matrix value(1, 1);
  value(0, 0) = g.loss;
  Var mention = forward.mention;
  Var pair = forward.pair;
  return tape.record(std::move(value), {mention, pair},
                     [mention, pair, g = std::move(g)](Tape& tp, const Matrix& grad) {
                       tp.accumulate(mention, grad(0, 0) * Matrix(g.mention));
                       tp.accumulate(pair, grad(0, 0) * Matrix(g.pair));
                     });
}

std::vector<Cluster> CorefHead::predict(const Matrix& tokens,
                                        const std::vector<SpanBounds>* gold_mentions) const {
  Tape tape(false);
  Forward f = forward(tape, tape.constant(tokens), gold_mentions);
  return decode_clusters(f.scores);
}

}  // namespace hmtl
