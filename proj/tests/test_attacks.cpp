#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "artk/attacks.hpp"
#include "artk/errors.hpp"
#include "support/finite_diff.hpp"

using namespace artk;
using artk::testing::random_tensor;

namespace {

// Two classes over a 1x1x2 input: z0 = 0, z1 = x1 - 2 x2.
ModelParams margin_model() {
  ModelParams m = build_mlp(0, {1, 1, 2}, {}, 2);
  m.params[0].value = Tensor({2, 2}, std::vector<Real>{0, 0, 1, -2});
  m.params[1].value = Tensor({2});
  return m;
}

AttackConfig plain(Real eps, Real alpha, std::size_t steps) {
  AttackConfig c;
  c.epsilon = eps;
  c.alpha = alpha;
  c.steps = steps;
  c.random_start = false;
  return c;
}

void expect_in_ball(const Tensor& adv, const Tensor& x, Real eps, Real lo, Real hi) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    ASSERT_LE(std::abs(adv[i] - x[i]), eps + 1e-6) << i;
    ASSERT_GE(adv[i], lo);
    ASSERT_LE(adv[i], hi);
  }
}

}  // namespace

TEST(Pgd, OneStepOnLinearMargin) {
  Network net(margin_model(), false);
  AttackConfig cfg = plain(0.1, 0.1, 1);
  cfg.lo = -1;
  AttackReport r = pgd_attack(net, Tensor({1, 1, 1, 2}), {0}, cfg);
  EXPECT_NEAR(r.x_adv[0], 0.1, 1e-15);
  EXPECT_NEAR(r.x_adv[1], -0.1, 1e-15);
  EXPECT_NEAR(r.samples[0].linf, 0.1, 1e-15);
  // CE(x_adv) = log(1 + e^{0.3})
  EXPECT_NEAR(r.samples[0].objective, std::log1p(std::exp(0.3)), 1e-12);
}

TEST(Pgd, ZeroEpsilonLeavesInputs) {
  Network net(build_mlp(3, {1, 4, 4}, {6}, 3), false);
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({5, 1, 4, 4}, rng, 0, 1);
  AttackConfig cfg;
  cfg.epsilon = 0;
  cfg.steps = 5;
  AttackReport r = pgd_attack(net, x, {0, 1, 2, 0, 1}, cfg);
  EXPECT_TRUE(r.x_adv == x);
  EXPECT_TRUE(inner_max_perturbation(net, x, {0, 1, 2, 0, 1}, cfg) == x);
}

TEST(Pgd, ConstraintsAndDeterminism) {
  Network net(build_mlp(8, {1, 4, 4}, {10}, 3), false);
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({20, 1, 4, 4}, rng, 0, 1);
  std::vector<std::size_t> labels(20);
  for (std::size_t i = 0; i < 20; ++i) labels[i] = i % 3;
  AttackConfig cfg;
  cfg.epsilon = 0.2;
  cfg.alpha = 0.05;
  cfg.steps = 7;
  cfg.seed = 99;
  AttackReport a = pgd_attack(net, x, labels, cfg), b = pgd_attack(net, x, labels, cfg);
  EXPECT_TRUE(a.x_adv == b.x_adv);
  expect_in_ball(a.x_adv, x, 0.2, 0, 1);
  for (const auto& s : a.samples) EXPECT_LE(s.linf, 0.2 + 1e-6);
  cfg.seed = 100;
  EXPECT_FALSE(pgd_attack(net, x, labels, cfg).x_adv == a.x_adv);
}

TEST(InnerMax, ZeroStepsIsRandomStart) {
  Network net(build_mlp(8, {1, 4, 4}, {10}, 3), false);
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({3, 1, 4, 4}, rng, 0, 1);
  AttackConfig cfg;
  cfg.steps = 0;
  cfg.epsilon = 0.3;
  cfg.seed = 5;
  Tensor xp = inner_max_perturbation(net, x, {0, 1, 2}, cfg);
  expect_in_ball(xp, x, 0.3, 0, 1);
  EXPECT_FALSE(xp == x);
  // same random start as PGD with zero steps
  EXPECT_TRUE(xp == pgd_attack(net, x, {0, 1, 2}, cfg).x_adv);
}

TEST(InnerMax, ConstraintsOnRandomNetworks) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Network net(build_mlp(seed, {1, 3, 3}, {7}, 4), false);
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({4, 1, 3, 3}, rng, 0, 1);
    AttackConfig cfg;
    cfg.epsilon = 0.15;
    cfg.alpha = 0.04;
    cfg.steps = 6;
    cfg.ig_steps_m = 3;
    cfg.seed = seed;
    Tensor xp = inner_max_perturbation(net, x, {0, 1, 2, 3}, cfg);
    expect_in_ball(xp, x, 0.15, 0, 1);
    EXPECT_TRUE(xp == inner_max_perturbation(net, x, {0, 1, 2, 3}, cfg));
  }
}

TEST(InnerMax, ReducesToPgdOnLinearMargin) {
  // Every term of the objective has gradient along w = (1,-2) here, so the
  // signed steps coincide with PGD.
  Network net(margin_model(), false);
  AttackConfig cfg = plain(0.25, 0.05, 6);
  cfg.lo = -1;
  Tensor x({1, 1, 1, 2}, std::vector<Real>{0.1, 0.2});
  Tensor pgd = pgd_attack(net, x, {0}, cfg).x_adv;
  Tensor inner = inner_max_perturbation(net, x, {0}, cfg);
  EXPECT_TRUE(pgd == inner);
  EXPECT_NEAR(inner[0], 0.35, 1e-12);
  EXPECT_NEAR(inner[1], -0.05, 1e-12);
}

namespace {

struct IfiaFixture {
  Network net{build_mlp(12, {1, 4, 4}, {12}, 3), false};
  AttributionConfig att{8, {}};
  std::vector<std::pair<Tensor, std::size_t>> samples;

  IfiaFixture() {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 12; ++i) {
      Tensor x = random_tensor({1, 1, 4, 4}, rng, 0, 1);
      NoGradGuard ng;
      samples.emplace_back(x, predictions(net.forward(Var(x)).value())[0]);
    }
  }
};

}  // namespace

TEST(Ifia, ZeroIterationsReturnsSample) {
  IfiaFixture f;
  IfiaConfig cfg;
  cfg.k = 5;
  cfg.iterations = 0;
  auto& [x, y] = f.samples[0];
  AttackReport r = ifia_topk_attack(f.net, x, y, f.att, cfg);
  EXPECT_TRUE(r.x_adv == x);
  EXPECT_EQ(r.samples[0].objective, 1.0);
  EXPECT_EQ(r.samples[0].best_iteration, 0u);
}

TEST(Ifia, ZeroEpsilonGivesUnitCorrelation) {
  IfiaFixture f;
  IfiaConfig cfg;
  cfg.k = 5;
  cfg.iterations = 3;
  cfg.epsilon = 0;
  for (auto& [x, y] : f.samples) {
    AttackReport r = ifia_topk_attack(f.net, x, y, f.att, cfg);
    EXPECT_TRUE(r.x_adv == x);
    EXPECT_DOUBLE_EQ(r.samples[0].objective, 1.0);
  }
}

TEST(Ifia, PreservesPredictionAndBall) {
  IfiaFixture f;
  IfiaConfig cfg;
  cfg.k = 4;
  cfg.iterations = 12;
  cfg.epsilon = 0.3;
  cfg.alpha = 0.05;
  cfg.ig_steps_m = 4;
  int moved = 0;
  for (auto& [x, y] : f.samples) {
    AttackReport r = ifia_topk_attack(f.net, x, y, f.att, cfg);
    const auto& s = r.samples[0];
    expect_in_ball(r.x_adv, x, 0.3, 0, 1);
    NoGradGuard ng;
    EXPECT_EQ(predictions(f.net.forward(Var(r.x_adv)).value())[0], y);
    EXPECT_TRUE(s.prediction_preserved);
    EXPECT_LE(s.objective, 1.0);
    moved += s.best_iteration > 0;
  }
  EXPECT_GT(moved, 0);
}

TEST(Ifia, RejectsMisclassifiedSample) {
  IfiaFixture f;
  auto& [x, y] = f.samples[0];
  IfiaConfig cfg;
  cfg.k = 3;
  EXPECT_THROW(ifia_topk_attack(f.net, x, (y + 1) % 3, f.att, cfg), PreconditionError);
  cfg.k = 17;
  EXPECT_THROW(ifia_topk_attack(f.net, x, y, f.att, cfg), ConfigError);
}
