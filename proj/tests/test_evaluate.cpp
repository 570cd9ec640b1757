#include <gtest/gtest.h>

#include "artk/errors.hpp"
#include "artk/evaluate.hpp"
#include "artk/trainer.hpp"

using namespace artk;

namespace {

EvalConfig small_eval() {
  EvalConfig c;
  c.pgd.epsilon = 0.1;
  c.pgd.alpha = 0.03;
  c.pgd.steps = 5;
  c.ifia.k = 10;
  c.ifia.epsilon = 0.1;
  c.ifia.alpha = 0.03;
  c.ifia.iterations = 4;
  c.ifia.ig_steps_m = 3;
  c.attribution.m = 6;
  c.batch_size = 7;
  c.seed = 3;
  return c;
}

ModelParams trained_mlp(const Dataset& ds) {
  TrainConfig t;
  t.arch = "mlp";
  t.steps = 150;
  t.batch_size = 8;
  t.optimizer.lr.base = 1e-3;
  t.seed = 1;
  return train(ds, t).model;
}

}  // namespace

TEST(Evaluate, DeterministicAcrossWorkerCounts) {
  Dataset ds = synthetic_blobs(30, 3, 11);
  ModelParams m = trained_mlp(ds);
  EvalConfig one = small_eval(), three = small_eval();
  three.workers = 3;
  RobustnessRecord a = evaluate(m, ds, one), b = evaluate(m, ds, three);
  EXPECT_EQ(to_json(a, nullptr).dump(), to_json(b, nullptr).dump());
  EXPECT_EQ(a.n_test, 30u);
  EXPECT_GT(a.nat_acc, 0.9);
  EXPECT_EQ(a.n_samples, std::size_t(std::lround(a.nat_acc * 30)));
  ASSERT_TRUE(a.median_topk && a.median_kendall);
  EXPECT_GE(*a.median_topk, 0.0);
  EXPECT_LE(*a.median_topk, 1.0);
  for (const auto& r : a.per_sample) {
    EXPECT_TRUE(r.record.prediction_preserved);
    EXPECT_LE(r.record.linf, 0.1 + 1e-6);
  }
}

TEST(Evaluate, NoCorrectPredictionsGivesNullMedians) {
  Dataset ds = synthetic_blobs(12, 2, 12);
  ModelParams m = build_mlp(0, {1, 8, 8}, {}, 2);
  // constant logits favouring a class that never appears
  for (auto& v : m.params[0].value.data()) v = 0;
  m.params[1].value = Tensor({2}, std::vector<Real>{0, 5});
  for (auto& l : ds.labels) l = 0;
  RobustnessRecord r = evaluate(m, ds, small_eval());
  EXPECT_EQ(r.nat_acc, 0.0);
  EXPECT_EQ(r.n_samples, 0u);
  EXPECT_FALSE(r.median_topk.has_value());
  auto j = to_json(r, {{"k", 1}});
  EXPECT_TRUE(j["median_kendall"].is_null());
  EXPECT_EQ(j["config_echo"]["k"], 1);
}

TEST(Evaluate, EmptyTestSetIsDataError) {
  Dataset ds = synthetic_blobs(4, 2, 1).head(0);
  ds.images = Tensor({0, 1, 8, 8});
  ds.labels.clear();
  EXPECT_THROW(evaluate(build_mlp(0, {1, 8, 8}, {}, 2), ds, small_eval()), DataError);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 4) throw ConfigError("boom");
               }),
               ConfigError);
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i]++; });
  for (int h : hit) EXPECT_EQ(h, 1);
}
