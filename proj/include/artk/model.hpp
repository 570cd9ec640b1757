#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "artk/autodiff.hpp"

namespace artk {

enum class LayerKind { Conv2d, MaxPool2x2, Relu, Flatten, Dense };

// `in`/`out` are channels for Conv2d and features for Dense.
struct LayerSpec {
  LayerKind kind;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t pad = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Classifier parameters plus the architecture they belong to. Conv2d and
// Dense layers own a "<name>.weight" / "<name>.bias" pair, in layer order.
struct ModelParams {
  std::string arch_name;
  std::vector<LayerSpec> layers;
  std::vector<NamedTensor> params;
  std::size_t class_count = 0;
  std::array<std::size_t, 3> input_shape{};  // channels, height, width

  // Throws ContractViolation if shapes disagree with the layer list.
  void validate() const;
  std::size_t parameter_count() const;
  std::size_t pixel_count() const { return input_shape[1] * input_shape[2]; }
};

// conv(32, 5x5, same) -> pool -> conv(64, 5x5, same) -> pool -> dense(1024)
// -> dense(classes), relu after every conv and the hidden dense layer.
// Weights ~ truncated normal(0, 0.1) cut at 2 sigma, biases 0.1.
ModelParams build_small_cnn(std::uint64_t seed, std::size_t class_count = 10,
                            std::array<std::size_t, 3> input_shape = {1, 28, 28});

// Fully connected relu network over the flattened input; `hidden` may be empty
// (a linear model). Same initialisation as the CNN.
ModelParams build_mlp(std::uint64_t seed, std::array<std::size_t, 3> input_shape,
                      const std::vector<std::size_t>& hidden, std::size_t class_count);

ModelParams build_from_layers(std::string arch_name, std::vector<LayerSpec> layers,
                              std::array<std::size_t, 3> input_shape,
                              std::size_t class_count, std::uint64_t seed);

// ModelParams bound into graph leaves. Trainable networks expose their
// parameters as leaves that require grad.
class Network {
 public:
  Network(const ModelParams& model, bool trainable);

  // x: (N, C, H, W) -> logits (N, classes)
  Var forward(const Var& x) const;

  const std::vector<Var>& params() const { return params_; }
  std::size_t class_count() const { return class_count_; }
  const std::array<std::size_t, 3>& input_shape() const { return input_shape_; }

 private:
  std::vector<LayerSpec> layers_;
  std::array<std::size_t, 3> input_shape_;
  std::size_t class_count_;
  std::vector<Var> params_;
};

enum class OutputMode { TrueClass, MostConfusingNegative, LossTrueClass };

struct OutputSelector {
  OutputMode mode = OutputMode::TrueClass;
  std::size_t label = 0;
};

// A selector with its class fixed: either the softmax probability of `cls`
// or the cross entropy with `cls` as the target.
struct ResolvedOutput {
  bool is_loss = false;
  std::size_t cls = 0;
};

// Highest-logit class other than `label`; ties go to the lower index.
std::size_t most_confusing_negative(std::span<const Real> logits_row, std::size_t label);

// Resolves MostConfusingNegative against the logits of the single sample x.
ResolvedOutput resolve_output(const Network& net, const Tensor& x, const OutputSelector& sel);

// Row-wise selected output for a batch of logits: shape (N).
Var selected_rows(const Var& logits, const ResolvedOutput& out);

// Batched selectors: the class each row of x (N, C, H, W) is scored on.
// Labels pass through except for MostConfusingNegative, resolved at x.
std::vector<std::size_t> resolve_classes(const Network& net, const Tensor& x, OutputMode mode,
                                         const std::vector<std::size_t>& labels);
// Softmax probability of cls[n] per row, or cross entropy for LossTrueClass.
Var selected_rows(const Var& logits, OutputMode mode, const std::vector<std::size_t>& cls);

// Scalar selected output for a single sample x of shape (1, C, H, W).
Var select_output(const Network& net, const Var& x, const OutputSelector& sel);

// Argmax per row of a logits tensor.
std::vector<std::size_t> predictions(const Tensor& logits);

}  // namespace artk
