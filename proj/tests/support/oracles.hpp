#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/crf.hpp"
#include "hmtl/metrics.hpp"

namespace hmtl::testing {

// Exhaustive CRF inference over all K^n tag sequences.
struct CrfBruteForce {
  double log_partition = 0.0;
  double best_score = 0.0;
  std::vector<int> best;  // lowest index sequence among ties
};
CrfBruteForce crf_brute_force(const Matrix& emissions, const CrfWeights& w);
// Score of one tag sequence, summed term by term.
double path_score(const Matrix& emissions, const CrfWeights& w, const std::vector<int>& seq);
// Every tag sequence of length n over k tags, in lexicographic order.
std::vector<std::vector<int>> all_sequences(int n, int k);

CrfWeights random_crf(int tags, Rng& rng, double scale = 1.0);
Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0);

// Central finite differences over every scalar of `params`, compared with
// the gradients accumulated by one backward pass of `loss`. The error of a
// parameter is ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8).
struct GradCheck {
  std::string worst_param;
  double max_relative_error = 0.0;
  std::size_t scalars = 0;
};
GradCheck check_gradients(ParameterStore& store, const std::vector<Parameter*>& params,
                          const std::function<Var(Tape&)>& loss, double step = 1e-4);

// Finite differences of a plain function over a flat vector.
Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                        double step = 1e-4);
double relative_error(const Matrix& analytic, const Matrix& numeric);

// CEAFe similarity of the best alignment by trying every injection.
double exhaustive_ceaf_similarity(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);
// Random clusterings over mentions (i, i), at most `max_clusters` clusters.
std::vector<Cluster> random_clusters(Rng& rng, int mentions, int max_clusters);

// Upper tail of the chi-square distribution with `dof` degrees of freedom
// (dof 1 or 2).
double chi_square_p_value(double statistic, int dof);

Cluster cluster(std::initializer_list<int> tokens);

}  // namespace hmtl::testing
