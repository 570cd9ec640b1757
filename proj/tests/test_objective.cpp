#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "artk/errors.hpp"
#include "artk/objective.hpp"
#include "artk/ops.hpp"
#include "support/finite_diff.hpp"

using namespace artk;
using artk::testing::random_tensor;

namespace {

Var map_row(std::vector<Real> v) {
  const std::size_t n = v.size();
  return Var(Tensor({1, n}, std::move(v)));
}

PixelDistribution random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<Real> p(n);
  double total = 0;
  for (auto& v : p) total += (v = u(rng));
  for (auto& v : p) v /= total;
  return PixelDistribution(std::move(p));
}

}  // namespace

TEST(KlDivergence, HandValues) {
  auto u = uniform_distribution(2);
  EXPECT_EQ(kl_divergence(u, u), 0.0);
  auto q = pixel_softmax({Var(Tensor::of({2, 0})), {}, 1});
  EXPECT_NEAR(kl_divergence(u, q), 0.434, 0.002);
  EXPECT_THROW(kl_divergence(u, uniform_distribution(3)), ContractViolation);
}

TEST(KlDivergence, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + i % 30;
    EXPECT_GE(kl_divergence(random_distribution(n, rng), random_distribution(n, rng)), 0.0);
  }
}

TEST(Cacr, HandValues) {
  Var c = cacr_from_maps(map_row({2, 0}), map_row({0, 0}));
  EXPECT_NEAR(c.value()[0], -0.434, 0.002);
  // agrees with the KL form
  const double kl_form = kl_divergence(uniform_distribution(2), uniform_distribution(2)) -
                         kl_divergence(uniform_distribution(2),
                                       pixel_softmax({Var(Tensor::of({2, 0})), {}, 1}));
  EXPECT_NEAR(c.value()[0], kl_form, 1e-12);
  EXPECT_EQ(cacr_from_maps(map_row({0, 0, 0}), map_row({0, 0, 0})).value()[0], 0.0);
}

TEST(Cacr, Antisymmetric) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    Var a(random_tensor({1, 16}, rng, -2, 2)), b(random_tensor({1, 16}, rng, -2, 2));
    EXPECT_EQ(cacr_from_maps(a, b).value()[0], -cacr_from_maps(b, a).value()[0]);
  }
}

TEST(Wacr, HandValue) {
  Var w = wacr_from_maps(map_row({0.5, -0.2}), map_row({0.1, 0.3}));
  EXPECT_NEAR(w.value()[0], 0.35, 1e-9);
  auto part = partition_pixels(std::vector<Real>{0.5, -0.2}, std::vector<Real>{0.1, 0.3});
  EXPECT_EQ(part.p1, std::vector<std::size_t>{1});
  EXPECT_EQ(part.p2, std::vector<std::size_t>{0});
}

TEST(Wacr, ZeroProductGoesToP2) {
  auto part = partition_pixels(std::vector<Real>{0, 1, -1}, std::vector<Real>{5, 0, 2});
  EXPECT_EQ(part.p1, std::vector<std::size_t>{2});
  EXPECT_EQ(part.p2, (std::vector<std::size_t>{0, 1}));
  // pixel 0 has A = 0, so it is free even though dA = 5
  EXPECT_NEAR(wacr_from_maps(map_row({0, 1, -1}), map_row({5, 0, 2})).value()[0], 2.0, 1e-15);
}

TEST(Wacr, NonNegativeAndPartitionIsTotal) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    Tensor a = random_tensor({1, 12}, rng, -1, 1), d = random_tensor({1, 12}, rng, -1, 1);
    if (i % 7 == 0) a[3] = 0;
    EXPECT_GE(wacr_from_maps(Var(a), Var(d)).value()[0], 0.0);
    auto part = partition_pixels(a.data(), d.data());
    std::vector<int> seen(12, 0);
    for (auto j : part.p1) ++seen[j];
    for (auto j : part.p2) ++seen[j];
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

namespace {

struct Fixture {
  ModelParams model = build_mlp(31, {1, 3, 3}, {8}, 3);  // 107 parameters
  Tensor x, xp;
  std::vector<std::size_t> labels{2, 0};

  Fixture() {
    std::mt19937_64 rng(41);
    x = random_tensor({2, 1, 3, 3}, rng, 0, 1);
    xp = x;
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto& v : xp.data()) v = std::clamp(v + u(rng), 0.0, 1.0);
  }
};

}  // namespace

TEST(TotalLoss, SingleSampleRegularizersMatchBatch) {
  Fixture f;
  Network net(f.model, false);
  ObjectiveConfig cfg = ObjectiveConfig::shared(1.0, 6);
  LossTerms t = total_loss(net, Var(f.x), Var(f.xp), f.labels, cfg);
  double cacr = 0, wacr = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor xb({1, 1, 3, 3}, std::vector<Real>(f.x.ptr() + 9 * b, f.x.ptr() + 9 * b + 9));
    Tensor xpb({1, 1, 3, 3}, std::vector<Real>(f.xp.ptr() + 9 * b, f.xp.ptr() + 9 * b + 9));
    cacr += cacr_loss(net, Var(xb), Var(xpb), f.labels[b], cfg).item() / 2;
    wacr += wacr_loss(net, Var(xb), Var(xpb), f.labels[b], cfg).item() / 2;
  }
  EXPECT_NEAR(t.cacr.item(), cacr, 1e-12);
  EXPECT_NEAR(t.wacr.item(), wacr, 1e-12);
  EXPECT_EQ(t.cacr_per_sample.size(), 2u);
}

TEST(TotalLoss, CompositionIdentity) {
  Fixture f;
  Network net(f.model, false);
  ObjectiveConfig cfg{1.0, 0.7, 5, {}};
  LossTerms t = total_loss(net, Var(f.x), Var(f.xp), f.labels, cfg);
  EXPECT_NEAR(t.total.item() - t.ce.item(), t.cacr.item() + 0.7 * t.wacr.item(), 1e-9);
}

TEST(TotalLoss, ZeroLambdaIsAdversarialCrossEntropy) {
  Fixture f;
  Network net(f.model, false);
  LossTerms t = total_loss(net, Var(f.x), Var(f.xp), f.labels, ObjectiveConfig::shared(0.0));
  Tensor ce = ops::cross_entropy(net.forward(Var(f.xp)), f.labels).value();
  EXPECT_EQ(t.total.item(), (ce[0] + ce[1]) / 2);
  EXPECT_FALSE(t.cacr.defined());
  EXPECT_FALSE(t.wacr.defined());
}

TEST(TotalLoss, WacrVanishesAtCleanInput) {
  Fixture f;
  Network net(f.model, false);
  EXPECT_EQ(wacr_loss(net, Var(Tensor({1, 1, 3, 3}, 0.5)), Var(Tensor({1, 1, 3, 3}, 0.5)), 1,
                      ObjectiveConfig::shared(1.0, 4))
                .item(),
            0.0);
}

TEST(TotalLoss, ParameterGradientMatchesFiniteDifferences) {
  Fixture f;
  ObjectiveConfig cfg = ObjectiveConfig::shared(1.0, 5);
  Network net(f.model, true);
  LossTerms t = total_loss(net, Var(f.x), Var(f.xp), f.labels, cfg);
  std::vector<Var> grads = gradient(t.total, std::span<const Var>(net.params()));
  for (std::size_t p = 0; p < f.model.params.size(); ++p) {
    Tensor fd = artk::testing::numeric_gradient(
        [&](const Tensor& v) {
          ModelParams copy = f.model;
          copy.params[p].value = v;
          Network frozen(copy, false);
          NoGradGuard ng;
          return double(total_loss(frozen, Var(f.x), Var(f.xp), f.labels, cfg).total.item());
        },
        f.model.params[p].value);
    EXPECT_LT(artk::testing::rel_error(grads[p].value(), fd), 1e-3) << f.model.params[p].name;
  }
}

TEST(TotalLoss, Errors) {
  Fixture f;
  Network net(f.model, false);
  EXPECT_THROW(total_loss(net, Var(f.x), Var(f.xp), {0}, ObjectiveConfig::shared(1)),
               ContractViolation);
  EXPECT_THROW(total_loss(net, Var(f.x), Var(f.xp), f.labels, ObjectiveConfig::shared(-1)),
               ConfigError);
}
