#include <gtest/gtest.h>

#include <cmath>

#include "hmtl/coref.hpp"
#include "oracles.hpp"

namespace hmtl {
namespace {

// Scores over spans (i, i) with every earlier span as antecedent.
CorefScores make_scores(int k, const Vector& mention, const Vector& pair) {
  CorefScores s;
  for (int i = 0; i < k; ++i) s.spans.push_back({i, i});
  s.pairs = antecedent_pairs(k, 50);
  s.mention = mention;
  s.pair = pair;
  return s;
}

TEST(EnumerateSpans, SmallCases) {
  EXPECT_EQ(enumerate_spans(3, 2), (std::vector<SpanBounds>{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}}));
  EXPECT_EQ(enumerate_spans(1, 10), (std::vector<SpanBounds>{{0, 0}}));
  EXPECT_EQ(enumerate_spans(10, 10).size(), 55u);
  EXPECT_THROW(enumerate_spans(3, 0), std::invalid_argument);
}

TEST(PruneMentions, KeepsAllWhenBudgetExceedsSpans) {
  const auto spans = enumerate_spans(2, 1);
  const std::vector<double> scores = {0.3, -0.1};
  EXPECT_EQ(prune_mentions(spans, scores, 1.0, 5), (std::vector<int>{0, 1}));
}

TEST(PruneMentions, TopFourOfTen) {
  const auto spans = enumerate_spans(10, 1);
  const std::vector<double> scores = {0.1, 0.9, 0.3, 0.8, 0.2, 0.7, 0.0, 0.6, 0.4, 0.5};
  EXPECT_EQ(prune_mentions(spans, scores, 0.4, 10), (std::vector<int>{1, 3, 5, 7}));
}

TEST(PruneMentions, TieGoesToEarlierSpan) {
  const auto spans = enumerate_spans(4, 1);
  const std::vector<double> scores = {0.0, 1.0, 0.5, 0.5};
  // ceil(0.5 * 4) = 2 kept: the best and the earlier of the tied pair.
  EXPECT_EQ(prune_mentions(spans, scores, 0.5, 4), (std::vector<int>{1, 2}));
}

TEST(Bucket, WidthAndDistanceBuckets) {
  const std::vector<std::pair<int, int>> cases = {{0, 0},  {1, 0},  {2, 1},  {3, 2},  {4, 3},  {5, 4},
                                                  {7, 4},  {8, 5},  {10, 5}, {15, 5}, {16, 6}, {63, 7},
                                                  {64, 8}, {500, 8}};
  for (auto [v, b] : cases) EXPECT_EQ(bucket(v), b) << v;
}

TEST(CorefLoss, SingleMentionIsZero) {
  const CorefScores s = make_scores(1, Vector::Zero(1), Vector::Zero(0));
  const std::vector<int> ids = {-1};
  EXPECT_EQ(coref_loss(s, ids), 0.0);
}

TEST(CorefLoss, SymmetricPairIsLog2) {
  const CorefScores s = make_scores(2, Vector::Zero(2), Vector::Zero(1));
  const std::vector<int> ids = {0, 0};
  EXPECT_NEAR(coref_loss(s, ids), std::log(2.0), 1e-12);
}

TEST(CorefLoss, TwoGoldAntecedents) {
  Vector pair(3);
  pair << 0.0, 1.0, 2.0;  // (1,0), (2,0), (2,1); anaphor 2 sees scores 1 and 2
  const CorefScores s = make_scores(3, Vector::Zero(3), pair);
  const std::vector<int> both = {0, 0, 0};
  const std::vector<int> ids = {0, 1, 0};
  const double anaphor2 = -std::log((std::exp(1.0) + std::exp(2.0)) / (1.0 + std::exp(1.0) + std::exp(2.0)));
  // 10.1073 / 11.1073 = 0.909969.
  EXPECT_NEAR(anaphor2, 0.094344, 5e-6);
  // With ids {0, 0, 0}, anaphor 1 adds -log(1 / 2).
  EXPECT_NEAR(coref_loss(s, both), anaphor2 + std::log(2.0), 1e-12);
  // Anaphor 2 with a single gold antecedent 0 and a wrong one.
  EXPECT_NEAR(coref_loss(s, ids),
              std::log(2.0) + std::log(1.0 + std::exp(1.0) + std::exp(2.0)) - 1.0, 1e-12);
}

TEST(CorefLoss, NonNegativeAndZeroOnlyAtCertainty) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 5;
    const auto pairs = antecedent_pairs(k, 50);
    const CorefScores s = make_scores(k, testing::random_matrix(k, 1, rng).col(0),
                                      testing::random_matrix(static_cast<int>(pairs.size()), 1, rng).col(0));
    const std::vector<int> ids = {0, 1, 0, -1, 1};
    EXPECT_GT(coref_loss(s, ids), 0.0);
  }
  // Huge gold scores and hugely negative wrong ones drive the loss to zero.
  Vector pair(3);
  pair << -1e3, 1e3, -1e3;
  const CorefScores s = make_scores(3, Vector::Zero(3), pair);
  const std::vector<int> ids = {0, -1, 0};
  EXPECT_NEAR(coref_loss(s, ids), 0.0, 1e-12);
}

TEST(AntecedentProbabilities, SumToOne) {
  Rng rng(43);
  const int k = 6;
  const auto pairs = antecedent_pairs(k, 50);
  const CorefScores s = make_scores(k, testing::random_matrix(k, 1, rng, 3.0).col(0),
                                    testing::random_matrix(static_cast<int>(pairs.size()), 1, rng, 3.0).col(0));
  for (int i = 0; i < k; ++i) {
    const auto p = antecedent_probabilities(s, i);
    EXPECT_EQ(p.size(), static_cast<std::size_t>(i + 1));
    double total = 0.0;
    for (double v : p) total += v;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(CorefLossGradient, MatchesFiniteDifferences) {
  Rng rng(47);
  const int k = 5;
  const auto pairs = antecedent_pairs(k, 50);
  const int p = static_cast<int>(pairs.size());
  const Vector mention = testing::random_matrix(k, 1, rng).col(0);
  const Vector pair = testing::random_matrix(p, 1, rng).col(0);
  const std::vector<int> ids = {0, 1, 0, -1, 1};
  const CorefGradient g = coref_loss_gradient(make_scores(k, mention, pair), ids);

  Vector x(k + p);
  x << mention, pair;
  const Vector numeric = testing::numeric_gradient(
      [&](const Vector& v) { return coref_loss(make_scores(k, v.head(k), v.tail(p)), ids); }, x);
  Vector analytic(k + p);
  analytic << g.mention, g.pair;
  EXPECT_LT(testing::relative_error(analytic, numeric), 1e-3);
}

TEST(DecodeClusters, NegativeScoresGiveNothing) {
  const CorefScores s = make_scores(3, Vector::Constant(3, -1.0), Vector::Zero(3));
  EXPECT_TRUE(decode_clusters(s).empty());
}

TEST(DecodeClusters, LinksAreTransitive) {
  Vector pair(3);
  pair << 1.0, -5.0, 1.0;  // B <- A, C <- B
  const CorefScores s = make_scores(3, Vector::Zero(3), pair);
  const auto clusters = decode_clusters(s);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].size(), 3u);
}

CorefHead tiny_head(ParameterStore& store, Rng& rng, int input_dim) {
  CorefOptions o;
  o.feature_dim = 2;
  o.hidden = 3;
  o.prune_ratio = 1.0;
  return CorefHead::create(store, "cr.head", Group::kCoref, input_dim, o, rng);
}

TEST(CorefHead, GoldMentionModeRecoversClustersWithPerfectScores) {
  Rng rng(53);
  ParameterStore store;
  const CorefHead head = tiny_head(store, rng, 2);
  // Gold spans replace enumeration; the scores are then set by hand.
  const std::vector<Cluster> gold = {testing::cluster({0, 3}), testing::cluster({1, 4})};
  const std::vector<SpanBounds> mentions = mention_bounds(gold);
  Tape tape(false);
  const Matrix tokens = testing::random_matrix(6, 2, rng);
  auto f = head.forward(tape, tape.constant(tokens), &mentions);
  ASSERT_EQ(f.scores.spans, mentions);
  // Perfect scores: +10 for gold links, -10 otherwise.
  const auto ids = gold_cluster_ids(f.scores.spans, gold);
  f.scores.mention.setZero();
  for (std::size_t k = 0; k < f.scores.pairs.size(); ++k) {
    const auto [i, j] = f.scores.pairs[k];
    f.scores.pair(static_cast<Eigen::Index>(k)) = ids[static_cast<std::size_t>(i)] == ids[static_cast<std::size_t>(j)] ? 10.0 : -10.0;
  }
  auto decoded = decode_clusters(f.scores);
  EXPECT_EQ(decoded.size(), 2u);
  EXPECT_DOUBLE_EQ(coref_report(decoded, gold).average_f1, 1.0);
}

TEST(CorefHead, SpanAttentionWeightsAreConvex) {
  Rng rng(59);
  ParameterStore store;
  const CorefHead head = tiny_head(store, rng, 2);
  Tape tape(false);
  // Constant token rows: any convex combination returns that row.
  const Matrix tokens = Matrix::Constant(5, 2, 0.7);
  Var logits = tape.constant(testing::random_matrix(5, 1, rng, 3.0));
  const auto spans = enumerate_spans(5, 3);
  const Matrix out = tape.value(span_attention(tape, tape.constant(tokens), logits, spans));
  EXPECT_TRUE(out.isApproxToConstant(0.7, 1e-12));
}

TEST(CorefHead, GradientsMatchFiniteDifferences) {
  Rng rng(61);
  ParameterStore store;
  CorefOptions o;
  o.feature_dim = 2;
  o.hidden = 3;
  o.max_width = 2;
  o.prune_ratio = 1.0;
  const CorefHead head = CorefHead::create(store, "cr.head", Group::kCoref, 2, o, rng);
  const Matrix tokens = testing::random_matrix(4, 2, rng);
  const std::vector<Cluster> gold = {testing::cluster({0, 2})};
  std::vector<Parameter*> params;
  std::size_t scalars = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    params.push_back(&store[i]);
    scalars += store[i].size();
  }
  EXPECT_LE(scalars, 200u);
  const auto result = testing::check_gradients(store, params, [&](Tape& tape) {
    auto f = head.forward(tape, tape.constant(tokens));
    return head.loss(tape, f, gold);
  });
  EXPECT_LT(result.max_relative_error, 1e-3) << result.worst_param;
}

}  // namespace
}  // namespace hmtl
