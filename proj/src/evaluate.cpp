#include "artk/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "artk/errors.hpp"
#include "artk/metrics.hpp"
#include "artk/random.hpp"

namespace artk {

EvalConfig::EvalConfig() {
  pgd.epsilon = Real(0.3);
  pgd.alpha = Real(0.01);
  pgd.steps = 100;
  pgd.random_start = true;
  ifia.k = 200;
  ifia.epsilon = Real(0.3);
  ifia.alpha = Real(0.01);
  ifia.iterations = 50;
  attribution.m = 50;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void summarize(RobustnessRecord& rec) {
  std::vector<double> topk, kendall, spear;
  for (const auto& r : rec.per_sample) {
    if (r.record.topk) topk.push_back(*r.record.topk);
    if (r.record.kendall) kendall.push_back(*r.record.kendall);
    if (r.record.spearman) spear.push_back(*r.record.spearman);
  }
  rec.n_samples = rec.per_sample.size();
  rec.median_topk = median(topk);
  rec.median_kendall = median(kendall);
  rec.median_spearman = median(spear);
}

RobustnessRecord evaluate(const ModelParams& model, const Dataset& test, const EvalConfig& cfg,
                          const std::function<void(const std::string&)>& progress) {
  if (test.size() == 0) throw DataError(DataError::Kind::Empty, "test set is empty");
  if (cfg.batch_size < 1) throw ConfigError("eval batch size must be >= 1");
  std::mutex say_mutex;
  auto say = [&](const std::string& s) {
    std::lock_guard lock(say_mutex);
    if (progress) progress(s);
  };
  RobustnessRecord rec;
  rec.n_test = test.size();
  const auto chunks = epoch_batches(test.size(), cfg.batch_size, 0, 0, false);

  std::vector<std::size_t> clean_pred(test.size());
  parallel_for(chunks.size(), cfg.workers, [&](std::size_t c) {
    const Network net(model, false);
    const Batch b = make_batch(test, chunks[c]);
    NoGradGuard ng;
    const auto p = predictions(net.forward(Var(b.x)).value());
    for (std::size_t j = 0; j < p.size(); ++j) clean_pred[chunks[c][j]] = p[j];
  });
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (clean_pred[i] == test.labels[i]) correct.push_back(i);
  }
  rec.nat_acc = double(correct.size()) / double(test.size());
  say("clean accuracy " + std::to_string(rec.nat_acc));

  if (cfg.run_pgd) {
    std::vector<char> robust(test.size(), 0);
    rec.pgd_samples.resize(test.size());
    if (cfg.keep_images) rec.pgd_x_adv = Tensor(test.images.shape());
    const std::size_t row = test.images.size() / test.size();
    std::atomic<std::size_t> done{0};
    parallel_for(chunks.size(), cfg.workers, [&](std::size_t c) {
      const Network net(model, false);
      const Batch b = make_batch(test, chunks[c]);
      AttackConfig pgd = cfg.pgd;
      pgd.seed = splitmix64(cfg.seed ^ splitmix64(0x50474400 + c));
      const AttackReport r = pgd_attack(net, b.x, b.labels, pgd);
      for (std::size_t j = 0; j < b.labels.size(); ++j) {
        if (r.samples[j].linf > double(pgd.epsilon) + 1e-6) {
          throw ContractViolation("pgd output outside the epsilon ball");
        }
        robust[chunks[c][j]] = r.samples[j].pred_adv == b.labels[j];
        rec.pgd_samples[chunks[c][j]] = r.samples[j];
        if (cfg.keep_images) {
          std::copy_n(r.x_adv.ptr() + j * row, row, rec.pgd_x_adv.ptr() + chunks[c][j] * row);
        }
      }
      say("pgd chunk " + std::to_string(++done) + "/" + std::to_string(chunks.size()));
    });
    std::size_t n = 0;
    for (char r : robust) n += r;
    rec.adv_acc = double(n) / double(test.size());
  }

  if (cfg.run_ifia) {
    std::vector<std::size_t> targets = correct;
    if (cfg.ifia_samples && targets.size() > cfg.ifia_samples) targets.resize(cfg.ifia_samples);
    rec.per_sample.resize(targets.size());
    std::atomic<std::size_t> done{0};
    parallel_for(targets.size(), cfg.workers, [&](std::size_t t) {
      const Network net(model, false);
      const std::size_t i = targets[t];
      const AttackReport r =
          ifia_topk_attack(net, test.sample(i), test.labels[i], cfg.attribution, cfg.ifia);
      if (r.samples[0].linf > double(cfg.ifia.epsilon) + 1e-6 || !r.samples[0].prediction_preserved) {
        throw ContractViolation("ifia output violates its constraints");
      }
      rec.per_sample[t] = {i, r.samples[0], cfg.keep_images ? r.x_adv : Tensor()};
      say("ifia " + std::to_string(++done) + "/" + std::to_string(targets.size()));
    });
  }
  summarize(rec);
  return rec;
}

nlohmann::json to_json(const EvalConfig& c) {
  return {{"pgd",
           {{"epsilon", c.pgd.epsilon},
            {"alpha", c.pgd.alpha},
            {"steps", c.pgd.steps},
            {"random_start", c.pgd.random_start}}},
          {"ifia",
           {{"k", c.ifia.k},
            {"epsilon", c.ifia.epsilon},
            {"alpha", c.ifia.alpha},
            {"iterations", c.ifia.iterations},
            {"ig_steps_m", c.ifia.ig_steps_m}}},
          {"attribution_m", c.attribution.m},
          {"ifia_samples", c.ifia_samples},
          {"seed", c.seed}};
}

nlohmann::json to_json(const SampleRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"label", r.label},
          {"pred_clean", r.pred_clean},
          {"pred_adv", r.pred_adv},
          {"prediction_preserved", r.prediction_preserved},
          {"objective", r.objective},
          {"linf", r.linf},
          {"topk", opt(r.topk)},
          {"kendall", opt(r.kendall)},
          {"spearman", opt(r.spearman)},
          {"best_iteration", r.best_iteration}};
}

nlohmann::json to_json(const RobustnessRecord& rec, const nlohmann::json& config_echo) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"nat_acc", rec.nat_acc},
          {"adv_acc", opt(rec.adv_acc)},
          {"median_topk", opt(rec.median_topk)},
          {"median_kendall", opt(rec.median_kendall)},
          {"median_spearman", opt(rec.median_spearman)},
          {"n_samples", rec.n_samples},
          {"n_test", rec.n_test},
          {"config_echo", config_echo}};
}

}  // namespace artk
