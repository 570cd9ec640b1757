#include "artk/objective.hpp"

#include <cmath>

#include "artk/errors.hpp"
#include "artk/ops.hpp"

namespace artk {

namespace {

Var batch_mean(const Var& v) { return ops::scale(ops::sum(v), Real(1) / Real(v.size())); }

Var baseline_batch(const ObjectiveConfig& cfg, const Shape& batch_shape) {
  Shape one = batch_shape;
  one[0] = 1;
  Tensor b = baseline_for({cfg.ig_steps_m, cfg.baseline}, one);
  const std::size_t n = batch_shape[0], dim = b.size();
  Tensor out(batch_shape);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(b.ptr(), dim, out.ptr() + i * dim);
  return Var(std::move(out));
}

void check_pair(const Var& x, const Var& xp, std::size_t labels) {
  if (x.shape() != xp.shape() || x.shape().size() != 4) {
    throw ContractViolation("objective: x " + shape_str(x.shape()) + " and x' " +
                            shape_str(xp.shape()) + " must share a (B,C,H,W) shape");
  }
  if (labels != x.shape()[0]) throw ContractViolation("objective: label count mismatch");
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!(lambda_cacr >= 0) || !(lambda_wacr >= 0)) {
    throw ConfigError("regularizer weights must be >= 0");
  }
  if (ig_steps_m < 1) throw ConfigError("ig_steps_m must be >= 1");
}

PixelPartition partition_pixels(std::span<const Real> base, std::span<const Real> change) {
  if (base.size() != change.size()) throw ContractViolation("partition: length mismatch");
  PixelPartition p;
  for (std::size_t i = 0; i < base.size(); ++i) {
    (base[i] * change[i] < 0 ? p.p1 : p.p2).push_back(i);
  }
  return p;
}

double kl_divergence(const PixelDistribution& p, const PixelDistribution& q) {
  if (p.size() != q.size()) throw ContractViolation("kl_divergence: length mismatch");
  double kl = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.probs()[i];
    kl += pi * (std::log(pi) - std::log(double(q.probs()[i])));
  }
  return kl;
}

Var cacr_from_maps(const Var& ig_true, const Var& ig_neg) {
  if (ig_true.shape() != ig_neg.shape() || ig_true.shape().size() != 2) {
    throw ContractViolation("cacr: maps must share a (B,P) shape");
  }
  const Real inv_p = Real(1) / Real(ig_true.shape()[1]);
  Var diff = ops::sub(ops::log_softmax(ig_true), ops::log_softmax(ig_neg));
  return ops::scale(ops::row_sum(diff), inv_p);
}

Var wacr_from_maps(const Var& base, const Var& change) {
  if (base.shape() != change.shape() || base.shape().size() != 2) {
    throw ContractViolation("wacr: maps must share a (B,P) shape");
  }
  Tensor in_p1(base.shape()), in_p2(base.shape());
  const Tensor& a = base.value();
  const Tensor& d = change.value();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool opposite = a[i] * d[i] < 0;
    in_p1[i] = opposite ? 1 : 0;
    in_p2[i] = opposite ? 0 : 1;
  }
  Var p1 = ops::mul(Var(std::move(in_p1)), ops::abs(change));
  Var p2 = ops::mul(Var(std::move(in_p2)), ops::abs(ops::mul(base, change)));
  return ops::row_sum(ops::add(p1, p2));
}

Var cacr_loss(const Network& net, const Var& x, const Var& x_prime, std::size_t label,
              const ObjectiveConfig& cfg) {
  check_pair(x, x_prime, 1);
  Var x0 = baseline_batch(cfg, x.shape());
  Var tru = integrated_gradients_batch(net, OutputMode::TrueClass, {label}, x0, x_prime,
                                       cfg.ig_steps_m);
  Var neg = integrated_gradients_batch(net, OutputMode::MostConfusingNegative, {label}, x0,
                                       x_prime, cfg.ig_steps_m);
  return ops::reshape(cacr_from_maps(tru, neg), {});
}

Var wacr_loss(const Network& net, const Var& x, const Var& x_prime, std::size_t label,
              const ObjectiveConfig& cfg) {
  check_pair(x, x_prime, 1);
  Var x0 = baseline_batch(cfg, x.shape());
  Var a = integrated_gradients_batch(net, OutputMode::TrueClass, {label}, x0, x, cfg.ig_steps_m);
  Var da = integrated_gradients_batch(net, OutputMode::TrueClass, {label}, x, x_prime,
                                      cfg.ig_steps_m);
  return ops::reshape(wacr_from_maps(a, da), {});
}

LossTerms regularizer_loss(const Network& net, const Var& x, const Var& x_prime,
                           const std::vector<std::size_t>& labels, const ObjectiveConfig& cfg) {
  check_pair(x, x_prime, labels.size());
  cfg.validate();
  LossTerms t;
  const std::size_t m = cfg.ig_steps_m;
  Var x0 = baseline_batch(cfg, x.shape());
  if (cfg.lambda_cacr > 0) {
    Var tru = integrated_gradients_batch(net, OutputMode::TrueClass, labels, x0, x_prime, m);
    Var neg =
        integrated_gradients_batch(net, OutputMode::MostConfusingNegative, labels, x0, x_prime, m);
    Var per_sample = cacr_from_maps(tru, neg);
    t.cacr_per_sample = per_sample.value().vec();
    t.cacr = batch_mean(per_sample);
    t.total = ops::scale(t.cacr, cfg.lambda_cacr);
  }
  if (cfg.lambda_wacr > 0) {
    Var a = integrated_gradients_batch(net, OutputMode::TrueClass, labels, x0, x, m);
    Var da = integrated_gradients_batch(net, OutputMode::TrueClass, labels, x, x_prime, m);
    t.wacr = batch_mean(wacr_from_maps(a, da));
    Var w = ops::scale(t.wacr, cfg.lambda_wacr);
    t.total = t.total.defined() ? ops::add(t.total, w) : w;
  }
  return t;
}

LossTerms total_loss(const Network& net, const Var& x, const Var& x_prime,
                     const std::vector<std::size_t>& labels, const ObjectiveConfig& cfg) {
  check_pair(x, x_prime, labels.size());
  cfg.validate();
  Var ce = batch_mean(ops::cross_entropy(net.forward(x_prime), labels));
  if (cfg.lambda_cacr == 0 && cfg.lambda_wacr == 0) return {ce, ce, {}, {}, {}};
  LossTerms t = regularizer_loss(net, x, x_prime, labels, cfg);
  t.ce = ce;
  t.total = ops::add(ce, t.total);
  return t;
}

}  // namespace artk
