#include "artk/model.hpp"

#include <algorithm>
#include <random>

#include "artk/errors.hpp"
#include "artk/ops.hpp"

namespace artk {

namespace {

constexpr double kInitStd = 0.1;
constexpr double kInitBias = 0.1;

Tensor truncated_normal(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, kInitStd);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) {
    double s;
    do {
      s = normal(rng);
    } while (std::abs(s) > 2 * kInitStd);
    v = static_cast<Real>(s);
  }
  return t;
}

// Walks the layer list tracking the activation shape (C, H, W) or (F).
struct ShapeWalker {
  std::size_t c, h, w;
  bool flat = false;
  std::size_t features() const { return flat ? c : c * h * w; }
};

}  // namespace

ModelParams build_from_layers(std::string arch_name, std::vector<LayerSpec> layers,
                              std::array<std::size_t, 3> input_shape,
                              std::size_t class_count, std::uint64_t seed) {
  ModelParams m;
  m.arch_name = std::move(arch_name);
  m.layers = std::move(layers);
  m.class_count = class_count;
  m.input_shape = input_shape;
  std::mt19937_64 rng(seed);
  std::size_t conv_i = 0, dense_i = 0;
  for (const auto& l : m.layers) {
    if (l.kind == LayerKind::Conv2d) {
      const std::string name = "conv" + std::to_string(++conv_i);
      m.params.push_back({name + ".weight", truncated_normal({l.out, l.in, l.kernel, l.kernel}, rng)});
      m.params.push_back({name + ".bias", Tensor({l.out}, Real(kInitBias))});
    } else if (l.kind == LayerKind::Dense) {
      const std::string name = "fc" + std::to_string(++dense_i);
      m.params.push_back({name + ".weight", truncated_normal({l.out, l.in}, rng)});
      m.params.push_back({name + ".bias", Tensor({l.out}, Real(kInitBias))});
    }
  }
  m.validate();
  return m;
}

ModelParams build_small_cnn(std::uint64_t seed, std::size_t class_count,
                            std::array<std::size_t, 3> input_shape) {
  const std::size_t c = input_shape[0];
  const std::size_t flat = 64 * (input_shape[1] / 4) * (input_shape[2] / 4);
  std::vector<LayerSpec> layers = {
      {LayerKind::Conv2d, c, 32, 5, 2},  {LayerKind::Relu},     {LayerKind::MaxPool2x2},
      {LayerKind::Conv2d, 32, 64, 5, 2}, {LayerKind::Relu},     {LayerKind::MaxPool2x2},
      {LayerKind::Flatten},              {LayerKind::Dense, flat, 1024},
      {LayerKind::Relu},                 {LayerKind::Dense, 1024, class_count},
  };
  return build_from_layers("small-cnn", std::move(layers), input_shape, class_count, seed);
}

ModelParams build_mlp(std::uint64_t seed, std::array<std::size_t, 3> input_shape,
                      const std::vector<std::size_t>& hidden, std::size_t class_count) {
  std::vector<LayerSpec> layers = {{LayerKind::Flatten}};
  std::size_t in = input_shape[0] * input_shape[1] * input_shape[2];
  for (std::size_t h : hidden) {
    layers.push_back({LayerKind::Dense, in, h});
    layers.push_back({LayerKind::Relu});
    in = h;
  }
  layers.push_back({LayerKind::Dense, in, class_count});
  return build_from_layers("mlp", std::move(layers), input_shape, class_count, seed);
}

void ModelParams::validate() const {
  if (class_count < 2) throw ContractViolation("model: class_count must be >= 2");
  ShapeWalker s{input_shape[0], input_shape[1], input_shape[2]};
  std::size_t p = 0;
  auto expect = [&](const Shape& shape) {
    if (p >= params.size() || params[p].value.shape() != shape) {
      throw ContractViolation("model: parameter " + std::to_string(p) + " should have shape " +
                              shape_str(shape));
    }
    ++p;
  };
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv2d:
        if (s.flat || l.in != s.c) throw ContractViolation("model: conv input channels");
        expect({l.out, l.in, l.kernel, l.kernel});
        expect({l.out});
        s.c = l.out;
        s.h = s.h + 2 * l.pad - l.kernel + 1;
        s.w = s.w + 2 * l.pad - l.kernel + 1;
        break;
      case LayerKind::MaxPool2x2:
        if (s.flat) throw ContractViolation("model: pooling after flatten");
        s.h /= 2;
        s.w /= 2;
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::Flatten:
        s = {s.features(), 1, 1, true};
        break;
      case LayerKind::Dense:
        if (!s.flat || l.in != s.features()) throw ContractViolation("model: dense input size");
        expect({l.out, l.in});
        expect({l.out});
        s.c = l.out;
        break;
    }
  }
  if (p != params.size()) throw ContractViolation("model: extra parameters");
  if (!s.flat || s.c != class_count) {
    throw ContractViolation("model: last layer must produce class_count logits");
  }
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

Network::Network(const ModelParams& model, bool trainable)
    : layers_(model.layers), input_shape_(model.input_shape), class_count_(model.class_count) {
  params_.reserve(model.params.size());
  for (const auto& p : model.params) params_.emplace_back(p.value, trainable);
}

Var Network::forward(const Var& x) const {
  const auto& in = input_shape_;
  if (x.shape().size() != 4 || x.shape()[1] != in[0] || x.shape()[2] != in[1] ||
      x.shape()[3] != in[2]) {
    throw ContractViolation("forward: expected (N," + std::to_string(in[0]) + "," +
                            std::to_string(in[1]) + "," + std::to_string(in[2]) + "), got " +
                            shape_str(x.shape()));
  }
  Var h = x;
  std::size_t p = 0;
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv2d:
        h = ops::add_channel_bias(ops::conv2d(h, params_[p], l.pad), params_[p + 1]);
        p += 2;
        break;
      case LayerKind::MaxPool2x2:
        h = ops::maxpool2x2(h);
        break;
      case LayerKind::Relu:
        h = ops::relu(h);
        break;
      case LayerKind::Flatten:
        h = ops::reshape(h, {h.shape()[0], h.size() / h.shape()[0]});
        break;
      case LayerKind::Dense:
        h = ops::dense(h, params_[p], params_[p + 1]);
        p += 2;
        break;
    }
  }
  return h;
}

std::size_t most_confusing_negative(std::span<const Real> logits_row, std::size_t label) {
  if (label >= logits_row.size()) throw ContractViolation("label out of range");
  std::size_t best = label == 0 ? 1 : 0;
  for (std::size_t j = 0; j < logits_row.size(); ++j) {
    if (j != label && logits_row[j] > logits_row[best]) best = j;
  }
  return best;
}

ResolvedOutput resolve_output(const Network& net, const Tensor& x, const OutputSelector& sel) {
  if (sel.label >= net.class_count()) {
    throw ContractViolation("selector label " + std::to_string(sel.label) + " out of range");
  }
  switch (sel.mode) {
    case OutputMode::TrueClass:
      return {false, sel.label};
    case OutputMode::LossTrueClass:
      return {true, sel.label};
    case OutputMode::MostConfusingNegative: {
      NoGradGuard ng;
      Tensor logits = net.forward(Var(x)).value();
      return {false, most_confusing_negative(logits.data(), sel.label)};
    }
  }
  throw ContractViolation("unknown output mode");
}

Var selected_rows(const Var& logits, const ResolvedOutput& out) {
  std::vector<std::size_t> cls(logits.shape().at(0), out.cls);
  return out.is_loss ? ops::cross_entropy(logits, cls) : ops::pick(ops::softmax(logits), cls);
}

std::vector<std::size_t> resolve_classes(const Network& net, const Tensor& x, OutputMode mode,
                                         const std::vector<std::size_t>& labels) {
  if (x.rank() == 0 || labels.size() != x.dim(0)) {
    throw ContractViolation("resolve_classes: " + std::to_string(labels.size()) +
                            " labels for batch " + shape_str(x.shape()));
  }
  for (std::size_t l : labels) {
    if (l >= net.class_count()) {
      throw ContractViolation("selector label " + std::to_string(l) + " out of range");
    }
  }
  if (mode != OutputMode::MostConfusingNegative) return labels;
  NoGradGuard ng;
  Tensor logits = net.forward(Var(x)).value();
  const std::size_t k = net.class_count();
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = most_confusing_negative(std::span<const Real>(logits.ptr() + i * k, k), labels[i]);
  }
  return out;
}

Var selected_rows(const Var& logits, OutputMode mode, const std::vector<std::size_t>& cls) {
  return mode == OutputMode::LossTrueClass ? ops::cross_entropy(logits, cls)
                                           : ops::pick(ops::softmax(logits), cls);
}

Var select_output(const Network& net, const Var& x, const OutputSelector& sel) {
  if (x.shape().empty() || x.shape()[0] != 1) {
    throw ContractViolation("select_output: expects a single sample");
  }
  ResolvedOutput out = resolve_output(net, x.value(), sel);
  return ops::reshape(selected_rows(net.forward(x), out), {});
}

std::vector<std::size_t> predictions(const Tensor& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Real* row = logits.ptr() + r * k;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
  }
  return out;
}

}  // namespace artk
