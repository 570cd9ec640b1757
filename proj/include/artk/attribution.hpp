#pragma once

// Integrated Gradients and the pixel distributions built from it.

#include <functional>
#include <vector>

#include "artk/autodiff.hpp"
#include "artk/model.hpp"

namespace artk {

struct AttributionConfig {
  std::size_t m = 50;  // Riemann steps
  // Baseline image x0 of shape (1, C, H, W); empty means all zeros.
  Tensor baseline;
};

// Per-pixel attributions (channels summed), length P = H * W. `values` is a
// graph node, so maps can be used inside differentiable losses.
struct AttributionMap {
  Var values;
  OutputSelector target;
  std::size_t m_used = 0;

  const Tensor& tensor() const { return values.value(); }
  std::size_t size() const { return values.size(); }
};

// Strictly positive probabilities over pixels summing to one.
class PixelDistribution {
 public:
  // Validates positivity and normalisation (|sum - 1| <= 1e-6).
  explicit PixelDistribution(std::vector<Real> probs);
  const std::vector<Real>& probs() const& { return probs_; }
  std::vector<Real> probs() && { return std::move(probs_); }
  std::size_t size() const { return probs_.size(); }

 private:
  std::vector<Real> probs_;
};

// Maps a batch (N, ...) to one scalar output per row, shape (N).
using BatchOutputFn = std::function<Var(const Var& batch)>;

// Elementwise IG of a row-wise function for a batch of B samples (B, ...):
// (x_to - x_from) * (1/m) sum_{k=1..m} df/dx at x_from + (k/m)(x_to - x_from).
// f sees the B*m path points sample-major (row b*m + k-1). Same shape as
// x_to, no channel sum.
Var integrated_gradients_raw(const BatchOutputFn& f, const Var& x_from, const Var& x_to,
                             std::size_t m);

// Per-pixel IG for a batch (B, C, H, W) with one label per sample: (B, H*W).
// MostConfusingNegative is resolved per sample at x_to.
Var integrated_gradients_batch(const Network& net, OutputMode mode,
                               const std::vector<std::size_t>& labels, const Var& x_from,
                               const Var& x_to, std::size_t m);

// IG_i = (x_to - x_from)_i * (1/m) sum_{k=1..m} d sel / dx at x_from + (k/m)(x_to - x_from),
// then summed over channels. Inputs are single samples (1, C, H, W).
// MostConfusingNegative is resolved at x_to. The result is differentiable
// with respect to the network parameters and both endpoints when grad mode
// is on; under NoGradGuard it is a constant.
AttributionMap integrated_gradients(const Network& net, const OutputSelector& sel,
                                    const Var& x_from, const Var& x_to, std::size_t m);

// A(x): true-class IG from the configured baseline to x.
AttributionMap base_attribution(const Network& net, std::size_t label, const Var& x,
                                const AttributionConfig& cfg);

// dA(x): true-class IG along the straight path x -> x_prime.
AttributionMap attribution_change(const Network& net, std::size_t label, const Var& x,
                                  const Var& x_prime, const AttributionConfig& cfg);

// Baseline tensor for an input of the given shape (zeros unless configured).
Tensor baseline_for(const AttributionConfig& cfg, const Shape& sample_shape);

PixelDistribution pixel_softmax(const AttributionMap& map);
PixelDistribution uniform_distribution(std::size_t pixels);

}  // namespace artk
