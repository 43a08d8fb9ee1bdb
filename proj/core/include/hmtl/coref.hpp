#pragma once

#include <compare>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/corpus.hpp"

namespace hmtl {

struct SpanBounds {
  int start = 0;
  int end = 0;
  int width() const { return end - start + 1; }
  auto operator<=>(const SpanBounds&) const = default;
};

// All spans of width 1..max_width in lexicographic (start, end) order.
std::vector<SpanBounds> enumerate_spans(int n, int max_width);

// Keeps the ceil(ratio * n) best-scoring spans (ties go to the earlier span)
// and returns their indices in document order.
std::vector<int> prune_mentions(const std::vector<SpanBounds>& spans,
                                std::span<const double> scores, double ratio, int n);

// Buckets 1, 2, 3, 4, 5-7, 8-15, 16-31, 32-63, 64+; values below 1 share
// the first bucket.
inline constexpr int kNumBuckets = 9;
int bucket(int value);

// Mention scores over candidate spans (document order) and feed-forward pair
// scores over (anaphor, antecedent) pairs. The full score of a pair is
// s(i, j) = m(i) + m(j) + pair; the dummy antecedent always scores 0.
struct CorefScores {
  std::vector<SpanBounds> spans;
  Vector mention;
  // (i, j) with j < i, grouped by i and ascending in j.
  std::vector<std::pair<int, int>> pairs;
  Vector pair;

  double score(std::size_t pair_index) const;
  // Indices into `pairs` whose anaphor is i.
  std::pair<std::size_t, std::size_t> antecedent_range(int i) const;
};

// Every earlier span within `max_antecedents` positions.
std::vector<std::pair<int, int>> antecedent_pairs(int span_count, int max_antecedents);

// P(antecedent | i); index 0 is the dummy, then antecedent_range(i) order.
std::vector<double> antecedent_probabilities(const CorefScores& scores, int i);

// Gold cluster id per span, -1 when the span is in no gold cluster.
std::vector<int> gold_cluster_ids(const std::vector<SpanBounds>& spans,
                                  const std::vector<Cluster>& clusters);

// Sum over anaphors of -log of the probability mass on gold antecedents.
// Anaphors without a gold antecedent among their candidates target the
// dummy.
double coref_loss(const CorefScores& scores, std::span<const int> cluster_ids);

struct CorefGradient {
  double loss = 0.0;
  Vector mention;
  Vector pair;
};
CorefGradient coref_loss_gradient(const CorefScores& scores, std::span<const int> cluster_ids);

// Best-antecedent linking (only positive scores beat the dummy), connected
// components, singletons dropped. Clusters are sorted.
std::vector<Cluster> decode_clusters(const CorefScores& scores);

struct CorefOptions {
  int max_width = 10;
  double prune_ratio = 0.4;
  int max_antecedents = 50;
  int feature_dim = 20;  // width and distance embeddings
  int hidden = 64;       // both scoring networks
  // Weight of a binary cross-entropy term on the mention scores of every
  // candidate span (gold mention or not), added to the training loss.
  double mention_loss_weight = 1.0;
};

class CorefHead {
 public:
  static CorefHead create(ParameterStore& store, const std::string& prefix, Group group,
                          int input_dim, CorefOptions options, Rng& rng);

  const CorefOptions& options() const { return options_; }
  int span_dim() const { return 3 * input_dim_ + options_.feature_dim; }

  struct Forward {
    CorefScores scores;
    Var mention;  // K x 1 over kept spans
    Var pair;     // P x 1
    std::vector<SpanBounds> candidates;  // before pruning
    Var candidate_mention;               // C x 1
  };

  // `tokens` is the n x D document encoding. With `gold_mentions` the
  // candidate set is exactly those spans and pruning is skipped.
  Forward forward(Tape& tape, Var tokens,
                  const std::vector<SpanBounds>* gold_mentions = nullptr) const;
  // Marginal log-likelihood of the gold antecedents plus the weighted
  // mention-detection term.
  Var loss(Tape& tape, const Forward& forward, const std::vector<Cluster>& gold) const;
  std::vector<Cluster> predict(const Matrix& tokens,
                               const std::vector<SpanBounds>* gold_mentions = nullptr) const;

  // Span representations [start ; end ; attention head ; width embedding].
  Var span_representations(Tape& tape, Var tokens, const std::vector<SpanBounds>& spans) const;

 private:
  struct Ffnn {
    Parameter* w1;
    Parameter* b1;
    Parameter* w2;
    Parameter* b2;
  };
  static Ffnn make_ffnn(ParameterStore& store, const std::string& prefix, Group group, int in,
                        int hidden, Rng& rng);
  static Var apply(Tape& tape, const Ffnn& f, Var x);
  Var antecedent_loss(Tape& tape, const Forward& forward, const std::vector<Cluster>& gold) const;

  CorefOptions options_;
  int input_dim_ = 0;
  Parameter* attention_w_ = nullptr;
  Parameter* attention_b_ = nullptr;
  Parameter* width_table_ = nullptr;
  Parameter* distance_table_ = nullptr;
  Ffnn mention_ffnn_{};
  Ffnn pair_ffnn_{};
};

// Attention-weighted sum of token rows inside each span. `logits` is n x 1.
Var span_attention(Tape& tape, Var tokens, Var logits, const std::vector<SpanBounds>& spans);

std::vector<SpanBounds> mention_bounds(const std::vector<Cluster>& clusters);

}  // namespace hmtl
