#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hmtl::testing {

std::vector<std::vector<int>> all_sequences(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> seq(static_cast<std::size_t>(n), 0);
  while (true) {
    out.push_back(seq);
    int pos = n - 1;
    while (pos >= 0 && ++seq[static_cast<std::size_t>(pos)] == k) seq[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  return out;
}

double path_score(const Matrix& emissions, const CrfWeights& w, const std::vector<int>& seq) {
  const int n = static_cast<int>(seq.size());
  double s = w.start(seq[0]) + w.stop(seq.back());
  for (int t = 0; t < n; ++t) s += emissions(t, seq[static_cast<std::size_t>(t)]);
  for (int t = 1; t < n; ++t) s += w.transitions(seq[static_cast<std::size_t>(t - 1)], seq[static_cast<std::size_t>(t)]);
  return s;
}

CrfBruteForce crf_brute_force(const Matrix& emissions, const CrfWeights& w) {
  const int n = static_cast<int>(emissions.rows());
  const int k = static_cast<int>(emissions.cols());
  CrfBruteForce out;
  out.best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  for (const auto& seq : all_sequences(n, k)) {
    const double s = path_score(emissions, w, seq);
    scores.push_back(s);
    if (s > out.best_score) {
      out.best_score = s;
      out.best = seq;
    }
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  out.log_partition = m + std::log(z);
  return out;
}

Matrix random_matrix(int rows, int cols, Rng& rng, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

CrfWeights random_crf(int tags, Rng& rng, double scale) {
  CrfWeights w;
  w.transitions = random_matrix(tags, tags, rng, scale);
  w.start = random_matrix(1, tags, rng, scale);
  w.stop = random_matrix(1, tags, rng, scale);
  return w;
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double denom = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / denom;
}

GradCheck check_gradients(ParameterStore& store, const std::vector<Parameter*>& params,
                          const std::function<Var(Tape&)>& loss, double step) {
  store.zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }
  std::vector<Matrix> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  store.zero_grad();

  auto evaluate = [&] {
    Tape tape(false);
    return tape.value(loss(tape))(0, 0);
  };
  GradCheck out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double saved = p.value.data()[k];
      p.value.data()[k] = saved + step;
      const double up = evaluate();
      p.value.data()[k] = saved - step;
      const double down = evaluate();
      p.value.data()[k] = saved;
      numeric.data()[k] = (up - down) / (2.0 * step);
    }
    out.scalars += static_cast<std::size_t>(p.value.size());
    const double err = relative_error(analytic[i], numeric);
    if (err >= out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_param = p.name;
    }
  }
  return out;
}

Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double step) {
  Vector g(x.size());
  Vector y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y(i) = x(i) + step;
    const double up = f(y);
    y(i) = x(i) - step;
    const double down = f(y);
    y(i) = x(i);
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

double exhaustive_ceaf_similarity(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  // Align the smaller side injectively into the larger one.
  const bool swap = pred.size() > gold.size();
  const auto& small = swap ? gold : pred;
  const auto& large = swap ? pred : gold;
  std::vector<int> idx(large.size());
  std::iota(idx.begin(), idx.end(), 0);
  double best = 0.0;
  // Permutations of the larger side; the first |small| entries form the
  // injection. Duplicated tails are harmless for a maximum.
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < small.size(); ++i) s += phi4(small[i], large[static_cast<std::size_t>(idx[i])]);
    best = std::max(best, s);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

std::vector<Cluster> random_clusters(Rng& rng, int mentions, int max_clusters) {
  std::uniform_int_distribution<int> pick(-1, max_clusters - 1);
  std::vector<Cluster> clusters(static_cast<std::size_t>(max_clusters));
  for (int m = 0; m < mentions; ++m) {
    const int c = pick(rng);
    if (c >= 0) clusters[static_cast<std::size_t>(c)].push_back(TaggedSpan{m, m, ""});
  }
  std::vector<Cluster> out;
  for (auto& c : clusters) {
    if (!c.empty()) out.push_back(std::move(c));
  }
  return out;
}

double chi_square_p_value(double statistic, int dof) {
  if (dof == 1) return std::erfc(std::sqrt(statistic / 2.0));
  if (dof == 2) return std::exp(-statistic / 2.0);
  throw std::invalid_argument("chi_square_p_value: dof must be 1 or 2");
}

Cluster cluster(std::initializer_list<int> tokens) {
  Cluster c;
  for (int t : tokens) c.push_back(TaggedSpan{t, t, ""});
  return c;
}

}  // namespace hmtl::testing
