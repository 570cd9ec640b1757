#include "artk/optim.hpp"

#include <cmath>

#include "artk/errors.hpp"

namespace artk {

Real LrSchedule::at(std::size_t step) const {
  Real lr = base;
  for (const auto& [from, rate] : boundaries) {
    if (step >= from) lr = rate;
  }
  return lr;
}

void LrSchedule::validate() const {
  if (!(base > 0)) throw ConfigError("learning rate must be > 0");
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    if (!(boundaries[i].second > 0)) throw ConfigError("learning rate must be > 0");
    if (i && boundaries[i].first <= boundaries[i - 1].first) {
      throw ConfigError("learning rate boundaries must be strictly ascending");
    }
  }
}

void OptimizerConfig::validate() const {
  lr.validate();
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam betas in [0,1)");
  if (!(adam_eps > 0)) throw ConfigError("adam epsilon must be > 0");
  if (!(momentum >= 0)) throw ConfigError("momentum must be >= 0");
  if (!(weight_decay >= 0)) throw ConfigError("weight decay must be >= 0");
}

void optimizer_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                    OptimizerState& state, const OptimizerConfig& cfg, std::size_t step) {
  if (params.size() != grads.size()) throw ContractViolation("optimizer: param/grad count");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape());
      if (cfg.kind == OptimizerConfig::Kind::Adam) state.v.emplace_back(p.shape());
    }
  }
  ++state.t;
  const double lr = cfg.lr.at(step);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    if (g.shape() != p.shape()) {
      throw ContractViolation("optimizer: gradient shape " + shape_str(g.shape()) + " for " +
                              shape_str(p.shape()));
    }
    Tensor& m = state.m[k];
    if (cfg.kind == OptimizerConfig::Kind::Adam) {
      Tensor& v = state.v[k];
      const double b1 = cfg.beta1, b2 = cfg.beta2;
      const double c1 = 1 - std::pow(b1, double(state.t)), c2 = 1 - std::pow(b2, double(state.t));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        m[i] = Real(b1 * m[i] + (1 - b1) * gi);
        v[i] = Real(b2 * v[i] + (1 - b2) * gi * gi);
        p[i] -= Real(lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps));
      }
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = double(g[i]) + cfg.weight_decay * p[i];
        m[i] = Real(cfg.momentum * m[i] + gi);
        p[i] -= Real(lr * m[i]);
      }
    }
  }
}

}  // namespace artk
