#pragma once

// L-infinity attacks: PGD, the attributional inner maximisation used in
// training, and the top-k IFIA attack on attributions.

#include <cstdint>
#include <optional>
#include <vector>

#include "artk/attribution.hpp"

namespace artk {

struct AttackConfig {
  Real epsilon = Real(0.3);
  Real alpha = Real(0.01);
  std::size_t steps = 40;
  bool random_start = true;
  Real lo = 0;
  Real hi = 1;
  std::size_t ig_steps_m = 10;  // IG steps for the attributional term
  std::uint64_t seed = 0;

  // epsilon == 0 and steps == 0 are accepted as degenerate attacks.
  void validate() const;
};

struct IfiaConfig {
  std::size_t k = 200;
  Real epsilon = Real(0.3);
  Real alpha = Real(0.01);
  std::size_t iterations = 100;
  Real lo = 0;
  Real hi = 1;
  std::size_t ig_steps_m = 10;  // IG steps of the surrogate objective

  void validate(std::size_t pixels) const;
};

struct SampleRecord {
  std::size_t label = 0;
  std::size_t pred_clean = 0;
  std::size_t pred_adv = 0;
  bool prediction_preserved = true;
  double objective = 0;  // PGD: cross entropy at x_adv; IFIA: Kendall D
  double linf = 0;
  // IFIA only: clean vs attacked attribution (m of AttributionConfig).
  std::optional<double> topk;
  std::optional<double> kendall;
  std::optional<double> spearman;
  std::size_t best_iteration = 0;  // 0 = unperturbed
};

struct AttackReport {
  Tensor x_adv;
  std::vector<SampleRecord> samples;
};

// Clip to the eps-ball around x, then to [lo, hi]; in place.
void project_linf(Tensor& x_adv, const Tensor& x, Real epsilon, Real lo, Real hi);

double linf_distance(const Tensor& a, const Tensor& b, std::size_t row);

// x <- Proj(x + alpha * sign(d CE / dx)), batched.
AttackReport pgd_attack(const Network& net, const Tensor& x, const std::vector<std::size_t>& labels,
                        const AttackConfig& cfg);

// Signed ascent on CE(x') + ||IG^{CE}(x, x')||_1 with cfg.ig_steps_m steps;
// returns the last iterate.
Tensor inner_max_perturbation(const Network& net, const Tensor& x,
                              const std::vector<std::size_t>& labels, const AttackConfig& cfg);

// Top-k attack on a correctly classified sample (1, C, H, W). Descends on
// the summed attribution over the original top-k pixels and returns the
// prediction-preserving iterate with the lowest top-k Kendall correlation.
AttackReport ifia_topk_attack(const Network& net, const Tensor& sample, std::size_t label,
                              const AttributionConfig& att_cfg, const IfiaConfig& cfg);

}  // namespace artk
