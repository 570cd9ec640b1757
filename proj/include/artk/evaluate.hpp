#pragma once

// Accuracy under PGD plus attribution robustness under IFIA.

#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "artk/attacks.hpp"
#include "artk/data.hpp"

namespace artk {

struct EvalConfig {
  AttackConfig pgd;
  IfiaConfig ifia;
  AttributionConfig attribution;
  // IFIA runs on the first `ifia_samples` correctly classified samples
  // (0 = all of them).
  std::size_t ifia_samples = 0;
  std::size_t batch_size = 100;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  bool run_pgd = true;
  bool run_ifia = true;
  // Store attacked images: IfiaResult::x_adv and RobustnessRecord::pgd_x_adv.
  bool keep_images = false;

  EvalConfig();
};

struct IfiaResult {
  std::size_t index = 0;  // row in the test set
  SampleRecord record;
  Tensor x_adv;  // only with EvalConfig::keep_images
};

struct RobustnessRecord {
  std::size_t n_test = 0;
  double nat_acc = 0;
  std::optional<double> adv_acc;
  std::vector<SampleRecord> pgd_samples;  // one per test row when PGD ran
  Tensor pgd_x_adv;                       // (N, C, H, W), only with keep_images
  std::size_t n_samples = 0;  // IFIA-attacked (correctly classified) samples
  std::optional<double> median_topk;
  std::optional<double> median_kendall;
  std::optional<double> median_spearman;
  std::vector<IfiaResult> per_sample;
};

// Aggregates per-sample IFIA records into medians.
void summarize(RobustnessRecord& rec);

// Deterministic for any worker count.
RobustnessRecord evaluate(const ModelParams& model, const Dataset& test, const EvalConfig& cfg,
                          const std::function<void(const std::string&)>& progress = {});

nlohmann::json to_json(const EvalConfig& cfg);
nlohmann::json to_json(const SampleRecord& r);
// Metrics report: nat_acc, adv_acc, median_*, n_samples, config_echo.
nlohmann::json to_json(const RobustnessRecord& rec, const nlohmann::json& config_echo);

// Runs fn(i) for i in [0, n) over `workers` threads; exceptions propagate.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace artk
