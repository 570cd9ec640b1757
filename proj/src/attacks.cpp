#include "artk/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "artk/errors.hpp"
#include "artk/metrics.hpp"
#include "artk/ops.hpp"
#include "artk/random.hpp"

namespace artk {

namespace {

Real sign(Real v) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); }

void check_batch(const Network& net, const Tensor& x, const std::vector<std::size_t>& labels) {
  if (x.rank() != 4 || x.dim(0) != labels.size()) {
    throw ContractViolation("attack: batch " + shape_str(x.shape()) + " with " +
                            std::to_string(labels.size()) + " labels");
  }
  for (std::size_t l : labels) {
    if (l >= net.class_count()) throw ContractViolation("attack: label out of range");
  }
}

std::vector<std::size_t> predict(const Network& net, const Tensor& x) {
  NoGradGuard ng;
  return predictions(net.forward(Var(x)).value());
}

Tensor start_point(const Tensor& x, const AttackConfig& cfg) {
  Tensor out = x;
  if (cfg.random_start && cfg.epsilon > 0) {
    Rng rng = derive_rng(cfg.seed, 0x5047440000ULL);
    for (auto& v : out.data()) v += Real(uniform(rng, -double(cfg.epsilon), double(cfg.epsilon)));
  }
  project_linf(out, x, cfg.epsilon, cfg.lo, cfg.hi);
  return out;
}

// Signed ascent loop shared by PGD and the attributional inner maximisation.
template <class Objective>
Tensor signed_ascent(const Tensor& x, const AttackConfig& cfg, Objective&& objective) {
  Tensor x_adv = start_point(x, cfg);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    Var xa(x_adv, true);
    Var obj = objective(xa);
    Tensor g = gradient(obj, xa).value();
    for (std::size_t i = 0; i < g.size(); ++i) x_adv[i] += cfg.alpha * sign(g[i]);
    project_linf(x_adv, x, cfg.epsilon, cfg.lo, cfg.hi);
  }
  return x_adv;
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon >= 0)) throw ConfigError("attack epsilon must be >= 0");
  if (!(alpha > 0)) throw ConfigError("attack alpha must be > 0");
  if (!(lo < hi)) throw ConfigError("attack valid range needs lo < hi");
  if (ig_steps_m < 1) throw ConfigError("attack ig_steps_m must be >= 1");
}

void IfiaConfig::validate(std::size_t pixels) const {
  if (k < 1 || k > pixels) {
    throw ConfigError("ifia k=" + std::to_string(k) + " outside [1, " + std::to_string(pixels) + "]");
  }
  if (!(epsilon >= 0)) throw ConfigError("ifia epsilon must be >= 0");
  if (!(alpha > 0)) throw ConfigError("ifia alpha must be > 0");
  if (!(lo < hi)) throw ConfigError("ifia valid range needs lo < hi");
  if (ig_steps_m < 1) throw ConfigError("ifia ig_steps_m must be >= 1");
}

void project_linf(Tensor& x_adv, const Tensor& x, Real epsilon, Real lo, Real hi) {
  if (x_adv.shape() != x.shape()) throw ContractViolation("project: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    Real v = std::clamp(x_adv[i], x[i] - epsilon, x[i] + epsilon);
    x_adv[i] = std::clamp(v, lo, hi);
  }
}

double linf_distance(const Tensor& a, const Tensor& b, std::size_t row) {
  const std::size_t dim = a.size() / a.dim(0);
  double d = 0;
  for (std::size_t i = row * dim; i < (row + 1) * dim; ++i) d = std::max(d, std::abs(double(a[i]) - b[i]));
  return d;
}

AttackReport pgd_attack(const Network& net, const Tensor& x, const std::vector<std::size_t>& labels,
                        const AttackConfig& cfg) {
  cfg.validate();
  check_batch(net, x, labels);
  AttackReport rep;
  rep.x_adv = signed_ascent(x, cfg, [&](const Var& xa) {
    return ops::sum(ops::cross_entropy(net.forward(xa), labels));
  });
  const auto clean = predict(net, x);
  NoGradGuard ng;
  Var logits = net.forward(Var(rep.x_adv));
  const Tensor ce = ops::cross_entropy(logits, labels).value();
  const auto adv = predictions(logits.value());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SampleRecord r;
    r.label = labels[i];
    r.pred_clean = clean[i];
    r.pred_adv = adv[i];
    r.prediction_preserved = clean[i] == adv[i];
    r.objective = ce[i];
    r.linf = linf_distance(rep.x_adv, x, i);
    rep.samples.push_back(r);
  }
  return rep;
}

Tensor inner_max_perturbation(const Network& net, const Tensor& x,
                              const std::vector<std::size_t>& labels, const AttackConfig& cfg) {
  cfg.validate();
  check_batch(net, x, labels);
  const Var clean(x);
  return signed_ascent(x, cfg, [&](const Var& xa) {
    Var ce = ops::sum(ops::cross_entropy(net.forward(xa), labels));
    Var change = integrated_gradients_batch(net, OutputMode::LossTrueClass, labels, clean, xa,
                                            cfg.ig_steps_m);
    return ops::add(ce, ops::sum(ops::abs(change)));
  });
}

AttackReport ifia_topk_attack(const Network& net, const Tensor& sample, std::size_t label,
                              const AttributionConfig& att_cfg, const IfiaConfig& cfg) {
  if (sample.rank() != 4 || sample.dim(0) != 1) {
    throw ContractViolation("ifia: expects one sample (1,C,H,W), got " + shape_str(sample.shape()));
  }
  const std::size_t pixels = sample.dim(2) * sample.dim(3);
  cfg.validate(pixels);
  check_batch(net, sample, {label});
  const std::size_t clean_pred = predict(net, sample)[0];
  if (clean_pred != label) {
    throw PreconditionError("ifia: sample is misclassified (label " + std::to_string(label) +
                            ", predicted " + std::to_string(clean_pred) + ")");
  }

  auto eval_map = [&](const Tensor& x) {
    NoGradGuard ng;
    return base_attribution(net, label, Var(x), att_cfg).tensor();
  };
  const Tensor original = eval_map(sample);
  Tensor in_top({1, pixels});
  for (std::size_t i : topk_indices(original.data(), cfg.k)) in_top[i] = 1;
  const Var mask(in_top);
  const Var x0(baseline_for(att_cfg, sample.shape()));

  AttackReport rep{sample, {}};
  SampleRecord rec;
  rec.label = label;
  rec.pred_clean = rec.pred_adv = clean_pred;
  rec.objective = 1.0;
  rec.topk = rec.kendall = rec.spearman = 1.0;

  double best = 2.0;
  Tensor x_adv = sample;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    Var xa(x_adv, true);
    Var map = integrated_gradients_batch(net, OutputMode::TrueClass, {label}, x0, xa, cfg.ig_steps_m);
    Tensor g = gradient(ops::sum(ops::mul(mask, map)), xa).value();
    for (std::size_t i = 0; i < g.size(); ++i) x_adv[i] -= cfg.alpha * sign(g[i]);
    project_linf(x_adv, sample, cfg.epsilon, cfg.lo, cfg.hi);

    if (predict(net, x_adv)[0] != clean_pred) continue;
    const Tensor attacked = eval_map(x_adv);
    double d;
    try {
      d = kendall_topk(original.data(), attacked.data(), cfg.k);
    } catch (const NumericError&) {
      continue;  // constant ranking on the compared pixels: not scorable
    }
    if (d < best) {
      best = d;
      rep.x_adv = x_adv;
      rec.objective = d;
      rec.kendall = d;
      rec.topk = topk_intersection(original.data(), attacked.data(), cfg.k);
      try {
        rec.spearman = spearman(original.data(), attacked.data());
      } catch (const NumericError&) {
        rec.spearman.reset();
      }
      rec.best_iteration = it;
    }
  }
  rec.linf = linf_distance(rep.x_adv, sample, 0);
  rep.samples.push_back(rec);
  return rep;
}

}  // namespace artk
