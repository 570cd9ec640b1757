#include "artk/attribution.hpp"

#include <cmath>
#include <memory>

#include "artk/errors.hpp"
#include "artk/ops.hpp"

namespace artk {

PixelDistribution::PixelDistribution(std::vector<Real> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ContractViolation("PixelDistribution: empty");
  double total = 0;
  for (Real p : probs_) {
    if (!(p > 0)) throw NumericError("PixelDistribution", "non-positive probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw NumericError("PixelDistribution", "probabilities sum to " + std::to_string(total));
  }
}

Tensor baseline_for(const AttributionConfig& cfg, const Shape& sample_shape) {
  if (cfg.baseline.size() == 0) return Tensor(sample_shape);
  if (cfg.baseline.shape() != sample_shape) {
    throw ContractViolation("baseline shape " + shape_str(cfg.baseline.shape()) +
                            " does not match input " + shape_str(sample_shape));
  }
  return cfg.baseline;
}

Var integrated_gradients_raw(const BatchOutputFn& f, const Var& x_from, const Var& x_to,
                             std::size_t m) {
  if (m < 1) throw ContractViolation("integrated_gradients: m must be >= 1");
  if (x_from.shape() != x_to.shape()) {
    throw ContractViolation("integrated_gradients: endpoint shapes differ " +
                            shape_str(x_from.shape()) + " vs " + shape_str(x_to.shape()));
  }
  const Shape& s = x_to.shape();
  if (s.empty() || s[0] == 0) {
    throw ContractViolation("integrated_gradients: empty batch " + shape_str(s));
  }
  const std::size_t batch = s[0], dim = x_to.size() / batch;

  auto w_to = std::make_shared<std::vector<Real>>(m);
  auto w_from = std::make_shared<std::vector<Real>>(m);
  auto w_mean = std::make_shared<std::vector<Real>>(m, Real(1) / Real(m));
  for (std::size_t k = 1; k <= m; ++k) {
    (*w_to)[k - 1] = Real(k) / Real(m);
    (*w_from)[k - 1] = Real(1) - Real(k) / Real(m);
  }
  Shape path_shape = s;
  path_shape[0] = batch * m;

  // The path gradient must be recorded even when the caller runs without
  // grad; the caller's mode then decides whether the result keeps its graph.
  const bool keep_graph = grad_enabled();
  Var avg_grad;
  {
    GradModeGuard on(true);
    Var path = ops::add(ops::expand_mid(x_from, batch, m, dim, path_shape, w_from),
                        ops::expand_mid(x_to, batch, m, dim, path_shape, w_to));
    if (!path.requires_grad()) path = Var(path.value(), true);
    Var total = ops::sum(f(path));
    Var grads = gradient(total, path, keep_graph);
    GradModeGuard restore(keep_graph);
    avg_grad = ops::reduce_mid(grads, batch, m, dim, s, w_mean);
  }
  return ops::mul(ops::sub(x_to, x_from), avg_grad);
}

Var integrated_gradients_batch(const Network& net, OutputMode mode,
                               const std::vector<std::size_t>& labels, const Var& x_from,
                               const Var& x_to, std::size_t m) {
  const Shape& s = x_to.shape();
  if (s.size() != 4) {
    throw ContractViolation("integrated_gradients: expects (B,C,H,W), got " + shape_str(s));
  }
  const std::vector<std::size_t> cls = resolve_classes(net, x_to.value(), mode, labels);
  std::vector<std::size_t> path_cls;
  path_cls.reserve(cls.size() * m);
  for (std::size_t c : cls) path_cls.insert(path_cls.end(), m, c);
  Var ig = integrated_gradients_raw(
      [&](const Var& path) { return selected_rows(net.forward(path), mode, path_cls); }, x_from,
      x_to, m);
  const std::size_t b = s[0], channels = s[1], pixels = s[2] * s[3];
  // (B, C, P) -> (B, P)
  return ops::reduce_mid(ig, b, channels, pixels, {b, pixels});
}

AttributionMap integrated_gradients(const Network& net, const OutputSelector& sel,
                                    const Var& x_from, const Var& x_to, std::size_t m) {
  const Shape& s = x_to.shape();
  if (s.size() != 4 || s[0] != 1) {
    throw ContractViolation("integrated_gradients: expects (1,C,H,W), got " + shape_str(s));
  }
  Var map = integrated_gradients_batch(net, sel.mode, {sel.label}, x_from, x_to, m);
  return {ops::reshape(map, {s[2] * s[3]}), sel, m};
}

AttributionMap base_attribution(const Network& net, std::size_t label, const Var& x,
                                const AttributionConfig& cfg) {
  Var x0(baseline_for(cfg, x.shape()));
  return integrated_gradients(net, {OutputMode::TrueClass, label}, x0, x, cfg.m);
}

AttributionMap attribution_change(const Network& net, std::size_t label, const Var& x,
                                  const Var& x_prime, const AttributionConfig& cfg) {
  return integrated_gradients(net, {OutputMode::TrueClass, label}, x, x_prime, cfg.m);
}

PixelDistribution pixel_softmax(const AttributionMap& map) {
  NoGradGuard ng;
  Tensor p = ops::softmax(map.values.detach()).value();
  return PixelDistribution(p.vec());
}

PixelDistribution uniform_distribution(std::size_t pixels) {
  if (pixels == 0) throw ContractViolation("uniform_distribution: zero pixels");
  return PixelDistribution(std::vector<Real>(pixels, Real(1) / Real(pixels)));
}

}  // namespace artk
