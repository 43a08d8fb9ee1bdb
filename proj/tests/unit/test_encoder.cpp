#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hmtl/encoder.hpp"
#include "hmtl/error.hpp"
#include "oracles.hpp"

namespace hmtl {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Encoder, ZeroParametersGiveZeros) {
  Rng rng(1);
  ParameterStore store;
  const auto enc = BiRecurrentEncoder::create(store, "e", Group::kNer, 3, 4, 2, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value.setZero();
  const Matrix out = encode(enc, testing::random_matrix(5, 3, rng));
  EXPECT_EQ(out.cols(), 8);
  EXPECT_TRUE(out.isZero());
}

TEST(Encoder, OutputWidthIsTwiceHidden) {
  Rng rng(2);
  ParameterStore store;
  const auto enc = BiRecurrentEncoder::create(store, "e", Group::kNer, 3, 5, 1, rng);
  EXPECT_EQ(encode(enc, testing::random_matrix(4, 3, rng)).cols(), 10);
  EXPECT_EQ(enc.output_dim(), 10);
}

TEST(Encoder, SingleStepMatchesHandRolledCell) {
  Rng rng(3);
  ParameterStore store;
  const int h = 2, d = 3;
  const auto enc = BiRecurrentEncoder::create(store, "e", Group::kNer, d, h, 1, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value = testing::random_matrix(static_cast<int>(store[i].value.rows()), static_cast<int>(store[i].value.cols()), rng);
  const Matrix x = testing::random_matrix(1, d, rng);
  const Matrix out = encode(enc, x);
  for (int dir = 0; dir < 2; ++dir) {
    const auto& p = enc.parameters()[0][static_cast<std::size_t>(dir)];
    const Vector z = p.w_input->value * x.row(0).transpose() + p.bias->value.row(0).transpose();
    for (int k = 0; k < h; ++k) {
      const double in = sigmoid(z(k)), cand = std::tanh(z(2 * h + k)), o = sigmoid(z(3 * h + k));
      const double expected = o * std::tanh(in * cand);
      EXPECT_NEAR(out(0, dir * h + k), expected, 1e-12);
    }
  }
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  ParameterStore store;
  const auto enc = BiRecurrentEncoder::create(store, "e", Group::kNer, 2, 2, 1, rng);
  const Matrix x = testing::random_matrix(3, 2, rng);
  const Matrix weights = testing::random_matrix(3, 4, rng);
  std::vector<Parameter*> params;
  for (std::size_t i = 0; i < store.size(); ++i) params.push_back(&store[i]);
  const auto result = testing::check_gradients(store, params, [&](Tape& tape) {
    return ops::sum(tape, ops::mul(tape, enc.encode(tape, tape.constant(x)), tape.constant(weights)));
  });
  EXPECT_LE(result.scalars, 200u);
  EXPECT_LT(result.max_relative_error, 1e-3) << result.worst_param;
}

TEST(Encoder, InputGradientMatchesFiniteDifferences) {
  Rng rng(5);
  ParameterStore store;
  const auto enc = BiRecurrentEncoder::create(store, "e", Group::kNer, 2, 2, 2, rng);
  Parameter& input = store.add("input", Group::kNer, testing::random_matrix(3, 2, rng));
  const auto result = testing::check_gradients(store, {&input}, [&](Tape& tape) {
    return ops::sum(tape, enc.encode(tape, tape.param(input)));
  });
  EXPECT_LT(result.max_relative_error, 1e-3);
}

TEST(Wiring, ParsesLevelsAndDefaultInputs) {
  const auto w = HierarchyWiring::parse("ner|emd|re,cr");
  EXPECT_EQ(w.level(Task::kNer), 1);
  EXPECT_EQ(w.level(Task::kCoref), 3);
  EXPECT_EQ(w.inputs(Task::kNer), (std::vector<Source>{Source::kEmbeddings}));
  EXPECT_EQ(w.inputs(Task::kEmd), (std::vector<Source>{Source::kEmbeddings, Source::kNer}));
  EXPECT_EQ(w.inputs(Task::kRelation), (std::vector<Source>{Source::kEmbeddings, Source::kEmd}));
  EXPECT_EQ(w.to_string(), "ner|emd|re,cr");
  auto deps = w.dependencies(Task::kCoref);
  std::sort(deps.begin(), deps.end());
  EXPECT_EQ(deps, (std::vector<Task>{Task::kNer, Task::kEmd}));
  EXPECT_TRUE(w.dependencies(Task::kNer).empty());
}

TEST(Wiring, SwappedOrder) {
  const auto w = HierarchyWiring::parse("emd|ner|re,cr");
  EXPECT_EQ(w.inputs(Task::kNer), (std::vector<Source>{Source::kEmbeddings, Source::kEmd}));
  EXPECT_EQ(w.inputs(Task::kEmd), (std::vector<Source>{Source::kEmbeddings}));
}

TEST(Wiring, RejectsUpwardOrUnknownInputs) {
  auto w = HierarchyWiring::parse("ner|emd");
  EXPECT_THROW(
      {
        w.set_inputs(Task::kNer, {Source::kEmbeddings, Source::kEmd});
        w.validate();
      },
      ConfigError);
  EXPECT_THROW(HierarchyWiring::parse("ner|pos"), ConfigError);
  EXPECT_THROW(HierarchyWiring::parse("ner|ner"), ConfigError);
  EXPECT_THROW(HierarchyWiring::parse(""), ConfigError);
}

}  // namespace
}  // namespace hmtl
