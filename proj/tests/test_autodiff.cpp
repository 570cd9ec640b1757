#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "artk/autodiff.hpp"
#include "artk/errors.hpp"
#include "artk/ops.hpp"
#include "support/finite_diff.hpp"

using namespace artk;
using artk::testing::numeric_gradient;
using artk::testing::random_tensor;
using artk::testing::rel_error;

namespace {

Tensor grad_of(const Var& scalar, const Var& x) { return gradient(scalar, x).value(); }

// Random values bounded away from zero so relu kinks stay out of FD reach.
Tensor away_from_zero(Shape shape, std::mt19937_64& rng) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (auto& v : t.data()) v = v < 0 ? v - Real(0.05) : v + Real(0.05);
  return t;
}

}  // namespace

TEST(Gradient, LinearFunction) {
  Var x(Tensor::of({0.5, -1.0}), true);
  Var w(Tensor::of({2.0, 3.0}));
  Tensor g = grad_of(ops::sum(ops::mul(w, x)), x);
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[1], 3.0);
}

TEST(Gradient, SquareThenL1OfGradient) {
  Var x(Tensor::of({1.0, -2.0}), true);
  Var g = gradient(ops::sum(ops::mul(x, x)), x, /*create_graph=*/true);
  EXPECT_DOUBLE_EQ(g.value()[0], 2.0);
  EXPECT_DOUBLE_EQ(g.value()[1], -4.0);

  // d/dx sum|2x| = 2 sign(x)
  Tensor gg = grad_of(ops::sum(ops::abs(g)), x);
  EXPECT_DOUBLE_EQ(gg[0], 2.0);
  EXPECT_DOUBLE_EQ(gg[1], -2.0);

  auto l1_of_grad = [](const Tensor& xv) {
    double s = 0;
    for (Real v : xv.data()) s += std::abs(2 * v);
    return s;
  };
  EXPECT_LT(rel_error(gg, numeric_gradient(l1_of_grad, x.value())), 1e-8);
}

TEST(Gradient, ConstantScalarGivesZeros) {
  Var x(Tensor({3}, 1.0), true);
  Var c(Tensor::scalar(4.0));
  Tensor g = grad_of(c, x);
  ASSERT_EQ(g.shape(), Shape{3});
  for (Real v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, UnrelatedInputGetsZeros) {
  Var x(Tensor::of({1.0, 2.0}), true);
  Var y(Tensor::of({3.0}), true);
  auto gs = gradient(ops::sum(ops::mul(x, x)), std::vector<Var>{x, y});
  EXPECT_EQ(gs[1].value(), Tensor({1}, 0.0));
}

TEST(Gradient, NonScalarOutputIsContractViolation) {
  Var x(Tensor::of({1.0, 2.0}), true);
  EXPECT_THROW(gradient(ops::mul(x, x), x), ContractViolation);
}

TEST(Gradient, NonFiniteValueReportsOp) {
  Var x(Tensor::of({1000.0}), true);
  try {
    ops::exp(x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.where(), "exp");
  }
  EXPECT_THROW(ops::log(Var(Tensor::of({-1.0}))), NumericError);
}

TEST(Gradient, IsLinearInTheOutput) {
  std::mt19937_64 rng(7);
  Var x(random_tensor({5}, rng), true);
  Var w(random_tensor({5}, rng));
  Var s1 = ops::sum(ops::exp(ops::mul(w, x)));
  Var s2 = ops::sum(ops::mul(x, ops::mul(x, x)));
  const Real a = 1.5, b = -0.25;
  Tensor lhs = grad_of(ops::add(ops::scale(s1, a), ops::scale(s2, b)), x);
  Tensor g1 = grad_of(s1, x), g2 = grad_of(s2, x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(lhs[i], a * g1[i] + b * g2[i], 1e-12);
}

TEST(Gradient, NoGradModeRecordsNothing) {
  Var x(Tensor::of({1.0}), true);
  NoGradGuard guard;
  Var y = ops::mul(x, x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Primitives, SoftmaxOfZerosIsUniform) {
  Tensor p = ops::softmax(Var(Tensor::of({0.0, 0.0, 0.0}))).value();
  for (Real v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Primitives, CrossEntropyIsMinusLogP) {
  Var z(Tensor({1, 3}, {std::log(0.2), std::log(0.5), std::log(0.3)}));
  EXPECT_NEAR(ops::cross_entropy(z, {1}).value()[0], -std::log(0.5), 1e-12);
  Var sure(Tensor({1, 2}, {0.0, -800.0}));
  EXPECT_NEAR(ops::cross_entropy(sure, {0}).value()[0], 0.0, 1e-15);
}

TEST(Primitives, IdentityKernelConvReturnsImage) {
  std::mt19937_64 rng(3);
  Var x(random_tensor({2, 1, 5, 4}, rng));
  Var k(Tensor({1, 1, 1, 1}, 1.0));
  EXPECT_EQ(ops::conv2d(x, k, 0).value(), x.value());
}

TEST(Primitives, MaxPoolPicksMaximum) {
  Var x(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  Tensor y = ops::maxpool2x2(x).value();
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 4.0);
}

TEST(Primitives, MaxPoolTieGoesToFirstIndex) {
  Var x(Tensor({1, 1, 2, 2}, {5, 5, 5, 5}), true);
  Tensor g = grad_of(ops::sum(ops::maxpool2x2(x)), x);
  EXPECT_EQ(g, Tensor({1, 1, 2, 2}, {1, 0, 0, 0}));
}

TEST(Primitives, ReluSubgradientAtZeroIsZero) {
  Var x(Tensor::of({0.0, 1.0, -1.0}), true);
  EXPECT_EQ(grad_of(ops::sum(ops::relu(x)), x), (Tensor::of({0.0, 1.0, 0.0})));
}

TEST(Primitives, ShapeMismatchIsContractViolation) {
  Var a(Tensor::of({1.0, 2.0})), b(Tensor::of({1.0}));
  EXPECT_THROW(ops::add(a, b), ContractViolation);
  EXPECT_THROW(ops::matmul(Var(Tensor({2, 3})), Var(Tensor({2, 3}))), ContractViolation);
  EXPECT_THROW(ops::conv2d(Var(Tensor({1, 2, 4, 4})), Var(Tensor({1, 1, 3, 3})), 1),
               ContractViolation);
  EXPECT_THROW(ops::cross_entropy(Var(Tensor({1, 3})), {3}), ContractViolation);
}

// --- finite-difference checks, one per primitive ---------------------------

struct FdCase {
  const char* name;
  Shape shape;
  std::function<Var(const Var&)> f;  // scalar-valued
};

class PrimitiveFd : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveFd, MatchesCentralDifferences) {
  std::mt19937_64 rng(100 + GetParam());
  Var w1(random_tensor({3, 4}, rng)), b1(random_tensor({3}, rng));
  Var k(random_tensor({2, 2, 3, 3}, rng));
  Var mix(random_tensor({2, 2, 4, 4}, rng));
  std::vector<FdCase> cases = {
      {"dense", {2, 4}, [&](const Var& x) { return ops::sum(ops::mul(ops::dense(x, w1, b1), ops::dense(x, w1, b1))); }},
      {"conv2d", {2, 2, 4, 4}, [&](const Var& x) { return ops::sum(ops::mul(ops::conv2d(x, k, 1), mix)); }},
      {"maxpool", {2, 2, 4, 4}, [&](const Var& x) { return ops::sum(ops::mul(ops::maxpool2x2(ops::mul(x, mix)), ops::maxpool2x2(mix))); }},
      {"relu", {6}, [&](const Var& x) { return ops::sum(ops::mul(ops::relu(x), ops::exp(x))); }},
      {"softmax", {2, 5}, [&](const Var& x) { Var p = ops::softmax(x); return ops::sum(ops::mul(p, ops::log(p))); }},
      {"cross_entropy", {3, 4}, [&](const Var& x) { return ops::sum(ops::cross_entropy(x, {0, 3, 1})); }},
  };
  for (const auto& c : cases) {
    Tensor x0 = away_from_zero(c.shape, rng);
    Var x(x0, true);
    Tensor analytic = grad_of(c.f(x), x);
    Tensor numeric = numeric_gradient(
        [&](const Tensor& xv) { NoGradGuard ng; return double(c.f(Var(xv)).item()); }, x0);
    EXPECT_LE(rel_error(analytic, numeric), 1e-4) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, PrimitiveFd, ::testing::Range(0, 5));

TEST(ConvAdjoints, SecondOrderThroughConvMatchesFd) {
  // g(K) = || d/dx <conv(x, K), m> ||^2 depends on K through conv2d_input_grad.
  std::mt19937_64 rng(11);
  Tensor x0 = random_tensor({1, 2, 5, 5}, rng);
  Var m(random_tensor({1, 3, 5, 5}, rng));
  Tensor k0 = random_tensor({3, 2, 3, 3}, rng);
  auto g_of = [&](const Var& k, bool create) {
    Var x(x0, true);
    Var gx = gradient(ops::sum(ops::mul(ops::conv2d(x, k, 1), m)), x, create);
    return ops::sum(ops::mul(gx, gx));
  };
  Var k(k0, true);
  Tensor analytic = grad_of(g_of(k, true), k);
  Tensor numeric = numeric_gradient([&](const Tensor& kv) { return double(g_of(Var(kv), false).item()); }, k0);
  EXPECT_LE(rel_error(analytic, numeric), 1e-6);
}

TEST(SecondOrder, InputGradientL1OfReluNetMatchesFd) {
  std::mt19937_64 rng(5);
  Tensor x0 = away_from_zero({1, 6}, rng);
  Tensor w1_0 = random_tensor({5, 6}, rng), b1_0 = random_tensor({5}, rng);
  Tensor w2_0 = random_tensor({3, 5}, rng), b2_0 = random_tensor({3}, rng);
  auto g_of = [&](const Tensor& w1v, bool create, Var* w1_out) {
    Var w1(w1v, create);
    if (w1_out) *w1_out = w1;
    Var x(x0, true);
    Var h = ops::relu(ops::dense(x, w1, Var(b1_0)));
    Var f = ops::sum(ops::pick(ops::softmax(ops::dense(h, Var(w2_0), Var(b2_0))), {1}));
    Var gx = gradient(f, x, true);
    return ops::sum(ops::abs(gx));
  };
  Var w1;
  Var g = g_of(w1_0, true, &w1);
  Tensor analytic = grad_of(g, w1);
  Tensor numeric = numeric_gradient([&](const Tensor& wv) { return double(g_of(wv, false, nullptr).item()); }, w1_0);
  EXPECT_LE(rel_error(analytic, numeric), 1e-3);
}
