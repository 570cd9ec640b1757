#pragma once

// Attributional regularizers and the outer training loss.

#include <span>
#include <vector>

#include "artk/attribution.hpp"

namespace artk {

struct ObjectiveConfig {
  Real lambda_cacr = 1;
  Real lambda_wacr = 1;
  std::size_t ig_steps_m = 50;
  Tensor baseline;  // per-sample (1, C, H, W); empty means zeros

  static ObjectiveConfig shared(Real lambda, std::size_t m = 50) { return {lambda, lambda, m, {}}; }
  void validate() const;
};

// p1: pixels where base and change attribution have opposite signs.
// A product of exactly zero lands in p2.
struct PixelPartition {
  std::vector<std::size_t> p1;
  std::vector<std::size_t> p2;
};

PixelPartition partition_pixels(std::span<const Real> base, std::span<const Real> change);

double kl_divergence(const PixelDistribution& p, const PixelDistribution& q);

// Row-wise over (B, P) maps, result (B).
// KL(u || softmax(neg)) - KL(u || softmax(tru)) = mean log softmax(tru) - mean log softmax(neg)
Var cacr_from_maps(const Var& ig_true, const Var& ig_neg);
// sum_{P1} |dA| + sum_{P2} |A dA|, with the partition frozen at current values.
Var wacr_from_maps(const Var& base, const Var& change);

// Single sample x, x_prime of shape (1, C, H, W); rank-0 results.
Var cacr_loss(const Network& net, const Var& x, const Var& x_prime, std::size_t label,
              const ObjectiveConfig& cfg);
Var wacr_loss(const Network& net, const Var& x, const Var& x_prime, std::size_t label,
              const ObjectiveConfig& cfg);

struct LossTerms {
  Var total;  // ce + lambda_cacr * cacr + lambda_wacr * wacr, batch mean
  Var ce;
  Var cacr;  // undefined when lambda_cacr == 0
  Var wacr;  // undefined when lambda_wacr == 0
  std::vector<Real> cacr_per_sample;
};

// lambda-weighted regularizers only; `total` and `ce` are undefined when
// both weights are 0.
LossTerms regularizer_loss(const Network& net, const Var& x, const Var& x_prime,
                           const std::vector<std::size_t>& labels, const ObjectiveConfig& cfg);

// Batched outer loss over x, x_prime (B, C, H, W).
LossTerms total_loss(const Network& net, const Var& x, const Var& x_prime,
                     const std::vector<std::size_t>& labels, const ObjectiveConfig& cfg);

}  // namespace artk
