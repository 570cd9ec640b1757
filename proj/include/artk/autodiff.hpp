#pragma once

// Tape-free reverse-mode autodiff over dense tensors.
//
// Every op on `Var`s records a node eagerly. `gradient` walks the recorded
// graph backwards; each op's vector-Jacobian product is itself written in
// terms of recorded ops, so with `create_graph` the returned gradients are
// ordinary graph nodes and can be differentiated again (reverse-over-reverse).
//
// Piecewise-linear ops (relu, maxpool) use a constant mask/index set in their
// backward, so their second derivative is zero away from kinks. relu'(0) = 0;
// maxpool ties go to the first element in row-major order.
//
// A graph belongs to the thread that built it. Grad mode is thread-local.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "artk/tensor.hpp"

namespace artk {

class Var;
struct Node;

// Returns one gradient per input; a default-constructed Var means "none".
using VjpFn = std::function<std::vector<Var>(const Var& self, const Var& grad_out)>;

struct Node {
  const char* op = "leaf";
  std::vector<Var> inputs;
  Tensor value;
  bool requires_grad = false;
  VjpFn vjp;
};

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  Real item() const { return node_->value.item(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }
  const Node* node() const noexcept { return node_.get(); }

  // Same value, cut from the graph.
  Var detach() const { return Var(value()); }

 private:
  friend Var record(const char*, Tensor, std::vector<Var>, VjpFn);
  friend std::vector<Var> gradient(const Var&, std::span<const Var>, bool);
  std::shared_ptr<Node> node_;
};

// Builds a node. Throws NumericError if `value` is not finite. The node only
// keeps inputs and backward when grad mode is on and some input needs grad.
Var record(const char* op, Tensor value, std::vector<Var> inputs, VjpFn vjp);

bool grad_enabled() noexcept;

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

struct NoGradGuard : GradModeGuard {
  NoGradGuard() : GradModeGuard(false) {}
};

// d scalar / d wrt[i]. `scalar` must hold exactly one element. A wrt node the
// scalar does not depend on gets a zero tensor. With create_graph the results
// are differentiable; otherwise they are detached constants.
std::vector<Var> gradient(const Var& scalar, std::span<const Var> wrt,
                          bool create_graph = false);

inline Var gradient(const Var& scalar, const Var& wrt, bool create_graph = false) {
  return gradient(scalar, std::span<const Var>(&wrt, 1), create_graph)[0];
}

}  // namespace artk
