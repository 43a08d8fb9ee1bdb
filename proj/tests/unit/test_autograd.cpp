#include <gtest/gtest.h>

#include "hmtl/autograd.hpp"
#include "oracles.hpp"

namespace hmtl {
namespace {

TEST(Ops, GradientsMatchFiniteDifferences) {
  Rng rng(1);
  ParameterStore store;
  Parameter& a = store.add("a", Group::kNer, testing::random_matrix(3, 4, rng));
  Parameter& b = store.add("b", Group::kNer, testing::random_matrix(4, 2, rng));
  Parameter& w = store.add("w", Group::kNer, testing::random_matrix(5, 4, rng));
  Parameter& bias = store.add("bias", Group::kNer, testing::random_matrix(1, 5, rng));
  const Matrix mask = testing::random_matrix(3, 14, rng);
  const auto result = testing::check_gradients(store, {&a, &b, &w, &bias}, [&](Tape& t) {
    Var va = t.param(a);
    Var h = ops::tanh(t, ops::affine(t, va, w, bias));        // 3x5
    Var s = ops::sigmoid(t, ops::matmul(t, va, t.param(b)));  // 3x2
    Var r = ops::relu(t, ops::matmul_nt(t, va, t.param(w)));  // 3x5
    Var cat = ops::concat_cols(t, std::vector<Var>{h, s, ops::scale(t, r, 0.5), ops::slice_rows(t, ops::matmul(t, va, t.param(b)), 0, 3)});
    Var rows = ops::gather_rows(t, ops::concat_rows(t, std::vector<Var>{h, r}), {0, 4, 4, 2});
    return ops::add(t, ops::sum(t, ops::mul(t, cat, t.constant(mask))),
                    ops::sum(t, ops::add_row(t, rows, t.param(bias))));
  });
  EXPECT_LT(result.max_relative_error, 1e-3) << result.worst_param;
}

TEST(Ops, DropoutIsIdentityAtZeroAndScalesKeptUnits) {
  Rng rng(2);
  Tape t(false);
  const Matrix x = Matrix::Constant(50, 4, 2.0);
  EXPECT_EQ(t.value(ops::dropout(t, t.constant(x), 0.0, rng)), x);
  const Matrix d = t.value(ops::dropout(t, t.constant(x), 0.5, rng));
  for (Eigen::Index i = 0; i < d.size(); ++i) EXPECT_TRUE(d.data()[i] == 0.0 || d.data()[i] == 4.0);
}

TEST(Lookup, RowSparseGradient) {
  ParameterStore store;
  Parameter& table = store.add("t", Group::kEmbeddings, Matrix::Ones(5, 2), true);
  Tape t;
  Var v = t.lookup(table, {1, 3, 1});
  t.backward(ops::sum(t, v));
  EXPECT_EQ(table.grad.row(1), (RowVector(2) << 2, 2).finished());
  EXPECT_EQ(table.grad.row(0), RowVector::Zero(2));
  EXPECT_TRUE(table.touched);
}

TEST(Adam, UpdatesOnlyTouchedParametersAndRows) {
  ParameterStore store;
  Parameter& table = store.add("t", Group::kEmbeddings, Matrix::Ones(4, 2), true);
  Parameter& used = store.add("u", Group::kNer, Matrix::Ones(2, 2));
  Parameter& unused = store.add("v", Group::kEmd, Matrix::Ones(2, 2));
  Adam adam({0.1, 0.9, 0.999, 1e-8, 5.0});
  for (int step = 0; step < 3; ++step) {
    Tape t;
    Var loss = ops::add(t, ops::sum(t, t.lookup(table, {2})), ops::sum(t, t.param(used)));
    t.backward(loss);
    adam.step(store);
  }
  EXPECT_EQ(unused.value, Matrix::Ones(2, 2));
  EXPECT_EQ(table.value.row(0), RowVector::Ones(2));
  EXPECT_NE(table.value.row(2), RowVector::Ones(2));
  EXPECT_LT(used.value(0, 0), 1.0);
  EXPECT_TRUE(used.grad.isZero());
}

TEST(Adam, ClipsGlobalNorm) {
  ParameterStore store;
  Parameter& p = store.add("p", Group::kNer, Matrix::Zero(1, 2));
  p.grad << 30.0, 40.0;
  touch(p);
  Adam adam({1e-3, 0.9, 0.999, 1e-8, 5.0});
  EXPECT_DOUBLE_EQ(adam.step(store), 50.0);
  // After clipping both moments see (3, 4); the first step moves each
  // coordinate by lr * sign.
  EXPECT_NEAR(p.value(0, 0), -1e-3, 1e-9);
  EXPECT_NEAR(p.value(0, 1), -1e-3, 1e-9);
}

TEST(Tape, FrozenParametersAreConstants) {
  ParameterStore store;
  Parameter& p = store.add("p", Group::kNer, Matrix::Ones(1, 1));
  p.trainable = false;
  Tape t;
  t.backward(ops::sum(t, ops::scale(t, t.param(p), 3.0)));
  EXPECT_FALSE(p.touched);
  EXPECT_TRUE(p.grad.isZero());
}

TEST(Store, SnapshotRestore) {
  ParameterStore store;
  Parameter& p = store.add("p", Group::kNer, Matrix::Ones(2, 2));
  const auto snap = store.snapshot();
  p.value.setZero();
  store.restore(snap);
  EXPECT_EQ(p.value, Matrix::Ones(2, 2));
  EXPECT_THROW(store.add("p", Group::kNer, Matrix::Ones(1, 1)), std::logic_error);
}

}  // namespace
}  // namespace hmtl
