#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "artk/errors.hpp"
#include "artk/model.hpp"
#include "artk/ops.hpp"
#include "support/finite_diff.hpp"

using namespace artk;

TEST(SmallCnn, SameSeedIsBitIdentical) {
  ModelParams a = build_small_cnn(7), b = build_small_cnn(7), c = build_small_cnn(8);
  ASSERT_EQ(a.params.size(), b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_EQ(a.params[i].name, b.params[i].name);
    EXPECT_TRUE(a.params[i].value == b.params[i].value);
  }
  EXPECT_FALSE(a.params[0].value == c.params[0].value);
}

TEST(SmallCnn, Architecture) {
  ModelParams m = build_small_cnn(1);
  // 32*25+32 + 64*32*25+64 + 1024*3136+1024 + 10*1024+10
  EXPECT_EQ(m.parameter_count(), 832u + 51264u + 3212288u + 10250u);
  EXPECT_EQ(m.params[0].name, "conv1.weight");
  EXPECT_EQ(m.params.back().name, "fc2.bias");
  for (Real v : m.params[0].value.data()) EXPECT_LE(std::abs(v), 0.2);
  EXPECT_EQ(m.params[1].value[0], Real(0.1));
}

TEST(SmallCnn, LogitsShape) {
  Network net(build_small_cnn(3), false);
  std::mt19937_64 rng(1);
  Var x(artk::testing::random_tensor({2, 1, 28, 28}, rng, 0, 1));
  EXPECT_EQ(net.forward(x).shape(), (Shape{2, 10}));
  EXPECT_THROW(net.forward(Var(Tensor({2, 1, 27, 28}))), ContractViolation);
}

TEST(SmallCnn, UntrainedAccuracyNearChance) {
  Network net(build_small_cnn(11), false);
  std::mt19937_64 rng(5);
  const std::size_t n = 200;
  Var x(artk::testing::random_tensor({n, 1, 28, 28}, rng, 0, 1));
  NoGradGuard ng;
  auto pred = predictions(net.forward(x).value());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += pred[i] == i % 10;
  const double acc = double(correct) / n;
  EXPECT_NEAR(acc, 0.10, 0.05);
}

TEST(ModelParams, ValidateRejectsBadShapes) {
  ModelParams m = build_mlp(1, {1, 2, 2}, {3}, 2);
  m.params[0].value = Tensor({3, 5});
  EXPECT_THROW(m.validate(), ContractViolation);
  ModelParams one = build_mlp(1, {1, 2, 2}, {}, 2);
  one.class_count = 1;
  EXPECT_THROW(one.validate(), ContractViolation);
}

TEST(Selector, MostConfusingNegative) {
  std::vector<Real> logits{2, 1, 0};
  EXPECT_EQ(most_confusing_negative(logits, 0), 1u);
  EXPECT_EQ(most_confusing_negative(logits, 1), 0u);
  std::vector<Real> tied{0, 5, 5};
  EXPECT_EQ(most_confusing_negative(tied, 0), 1u);
  EXPECT_THROW(most_confusing_negative(logits, 3), ContractViolation);
}

namespace {

// Linear 3-class model over a 1x1x1 input whose logits are exactly `bias`.
ModelParams constant_logits(std::vector<Real> bias) {
  const std::size_t k = bias.size();
  ModelParams m = build_mlp(0, {1, 1, 1}, {}, k);
  m.params[0].value = Tensor({k, 1});
  m.params[1].value = Tensor({k}, std::move(bias));
  return m;
}

}  // namespace

TEST(Selector, LossTrueClassOnFlatLogits) {
  Network net(constant_logits({0, 0, 0}), false);
  Var x(Tensor({1, 1, 1, 1}));
  EXPECT_NEAR(select_output(net, x, {OutputMode::LossTrueClass, 0}).item(), std::log(3.0), 1e-12);
  EXPECT_NEAR(select_output(net, x, {OutputMode::TrueClass, 2}).item(), 1.0 / 3, 1e-12);
}

TEST(Selector, ResolvesNegativeFromLogits) {
  Network net(constant_logits({2, 1, 0}), false);
  Var x(Tensor({1, 1, 1, 1}));
  auto r = resolve_output(net, x.value(), {OutputMode::MostConfusingNegative, 0});
  EXPECT_EQ(r.cls, 1u);
  const double p1 = std::exp(1.0) / (std::exp(2.0) + std::exp(1.0) + 1.0);
  EXPECT_NEAR(select_output(net, x, {OutputMode::MostConfusingNegative, 0}).item(), p1, 1e-12);
  EXPECT_THROW(select_output(net, x, {OutputMode::TrueClass, 3}), ContractViolation);
}

TEST(Selector, RandomProperties) {
  Network net(build_mlp(4, {1, 4, 4}, {8}, 10), false);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Var x(artk::testing::random_tensor({1, 1, 4, 4}, rng, -3, 3));
    const std::size_t label = trial % 10;
    const double p = select_output(net, x, {OutputMode::TrueClass, label}).item();
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    Tensor probs = ops::softmax(net.forward(x)).value();
    double total = 0;
    for (Real v : probs.data()) total += v;
    EXPECT_NEAR(total, 1.0, 1e-6);
    auto r = resolve_output(net, x.value(), {OutputMode::MostConfusingNegative, label});
    EXPECT_NE(r.cls, label);
  }
}
