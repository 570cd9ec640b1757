#pragma once

#include <utility>
#include <vector>

#include "artk/tensor.hpp"

namespace artk {

// Piecewise-constant learning rate: `base` until the first boundary, then
// the rate of the last boundary whose step index has been reached.
struct LrSchedule {
  Real base = Real(1e-4);
  std::vector<std::pair<std::size_t, Real>> boundaries;  // (step, lr), ascending steps

  Real at(std::size_t step) const;
  void validate() const;
};

struct OptimizerConfig {
  enum class Kind { Adam, MomentumWD };
  Kind kind = Kind::Adam;
  LrSchedule lr;
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real adam_eps = Real(1e-8);
  Real momentum = Real(0.9);
  Real weight_decay = Real(2e-4);  // MomentumWD only

  void validate() const;
};

struct OptimizerState {
  std::size_t t = 0;  // updates applied so far
  std::vector<Tensor> m;  // Adam first moment / momentum buffer
  std::vector<Tensor> v;  // Adam second moment
};

// One update in place; `step` selects the learning rate.
//   Adam:       m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
//               p -= lr * m/(1-b1^t) / (sqrt(v/(1-b2^t)) + eps)
//   MomentumWD: g' = g + wd p; m = mu m + g'; p -= lr m
void optimizer_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                    OptimizerState& state, const OptimizerConfig& cfg, std::size_t step);

}  // namespace artk
