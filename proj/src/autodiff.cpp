#include "artk/autodiff.hpp"

#include <unordered_map>
#include <unordered_set>

#include "artk/errors.hpp"
#include "artk/ops.hpp"

namespace artk {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) {
  g_grad_enabled = enabled;
}
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  if (!value.all_finite()) throw NumericError("leaf", "non-finite value");
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var record(const char* op, Tensor value, std::vector<Var> inputs, VjpFn vjp) {
  if (!value.all_finite()) throw NumericError(op, "non-finite value");
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->op = op;
  out.node_->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->inputs = std::move(inputs);
    out.node_->vjp = std::move(vjp);
  }
  return out;
}

std::vector<Var> gradient(const Var& scalar, std::span<const Var> wrt,
                          bool create_graph) {
  if (!scalar.defined() || scalar.size() != 1) {
    throw ContractViolation("gradient: output must hold exactly one element, got " +
                            (scalar.defined() ? shape_str(scalar.shape()) : "undefined"));
  }
  std::unordered_set<const Node*> targets;
  for (const Var& w : wrt) {
    if (w.defined() && w.requires_grad()) targets.insert(w.node());
  }

  // Post-order over the nodes that need grad; `relevant` marks nodes through
  // which some target is reachable.
  std::vector<Node*> order;
  std::unordered_map<const Node*, bool> relevant;
  if (scalar.requires_grad() && !targets.empty()) {
    struct Frame {
      Node* node;
      std::size_t next;
    };
    std::vector<Frame> stack{{scalar.node_.get(), 0}};
    relevant.emplace(scalar.node(), false);
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next < top.node->inputs.size()) {
        Node* child = top.node->inputs[top.next++].node_.get();
        if (child->requires_grad && !relevant.contains(child)) {
          relevant.emplace(child, false);
          stack.push_back({child, 0});
        }
        continue;
      }
      Node* n = top.node;
      bool r = targets.contains(n);
      for (const Var& in : n->inputs) {
        auto it = relevant.find(in.node());
        if (it != relevant.end() && it->second) r = true;
      }
      relevant[n] = r;
      order.push_back(n);
      stack.pop_back();
    }
  }

  GradModeGuard mode(create_graph);
  std::unordered_map<const Node*, Var> grads;
  if (!order.empty() && relevant[scalar.node()]) {
    grads.emplace(scalar.node(), Var(Tensor(scalar.shape(), Real(1))));
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!relevant[n] || n->inputs.empty()) continue;
    auto g = grads.find(n);
    if (g == grads.end()) continue;
    Var self;
    self.node_ = std::shared_ptr<Node>(scalar.node_, n);  // owned through scalar
    std::vector<Var> in_grads = n->vjp(self, g->second);
    if (!targets.contains(n)) grads.erase(g);
    for (std::size_t i = 0; i < n->inputs.size(); ++i) {
      const Node* in = n->inputs[i].node();
      if (i >= in_grads.size() || !in_grads[i].defined()) continue;
      auto rel = relevant.find(in);
      if (rel == relevant.end() || !rel->second) continue;
      auto [slot, inserted] = grads.try_emplace(in, in_grads[i]);
      if (!inserted) slot->second = ops::add(slot->second, in_grads[i]);
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    auto g = w.defined() ? grads.find(w.node()) : grads.end();
    if (g != grads.end()) {
      result.push_back(create_graph || !g->second.requires_grad() ? g->second
                                                             : g->second.detach());
    } else {
      result.emplace_back(Tensor(w.defined() ? w.shape() : Shape{}));
    }
  }
  return result;
}

}  // namespace artk
