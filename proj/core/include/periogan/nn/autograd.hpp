#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "periogan/nn/tensor.hpp"

namespace periogan::nn {

template <class T>
class Var;

/// Given the node's own output and the upstream gradient, produce one gradient
/// per input (an undefined Var for inputs that do not need one). Backward
/// functions are written in terms of the public ops, so running them with
/// recording enabled yields a differentiable gradient graph (double backprop).
template <class T>
using BackwardFn =
    std::function<std::vector<Var<T>>(const Var<T>& self, const Var<T>& grad_out)>;

template <class T>
struct Node {
  TensorT<T> value;
  bool requires_grad = false;
  std::vector<Var<T>> inputs;
  BackwardFn<T> backward;
  Var<T> grad;  // populated on leaves by backward()
  const char* op = "leaf";
};

/// Thread-local switch controlling whether ops record the graph.
class GradMode {
 public:
  static bool enabled() { return flag(); }
  static void set(bool on) { flag() = on; }

 private:
  static bool& flag() {
    thread_local bool value = true;
    return value;
  }
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool on) : prev_(GradMode::enabled()) { GradMode::set(on); }
  ~GradModeGuard() { GradMode::set(prev_); }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool prev_;
};

using NoGradGuard = GradModeGuard;
inline GradModeGuard no_grad_guard() { return GradModeGuard(false); }

template <class T>
class Var {
 public:
  Var() = default;

  explicit Var(TensorT<T> value, bool requires_grad = false)
      : n_(std::make_shared<Node<T>>()) {
    n_->value = std::move(value);
    n_->requires_grad = requires_grad;
  }

  static Var from_node(std::shared_ptr<Node<T>> n) {
    Var v;
    v.n_ = std::move(n);
    return v;
  }

  bool defined() const { return static_cast<bool>(n_); }

  const TensorT<T>& val() const { return n_->value; }
  TensorT<T>& val_mut() { return n_->value; }

  const Shape& shape() const { return n_->value.shape; }
  int64_t numel() const { return n_->value.numel(); }

  bool requires_grad() const { return n_ && n_->requires_grad; }
  void set_requires_grad(bool on) { n_->requires_grad = on; }

  bool is_leaf() const { return n_ && !n_->backward; }

  /// Accumulated gradient (leaves only, after backward()).
  const Var& grad() const { return n_->grad; }
  void zero_grad() { n_->grad = Var(); }

  Node<T>* node() const { return n_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return n_; }

  T item() const {
    require(n_ && n_->value.numel() == 1, ErrorKind::ShapeError, "item() needs a scalar");
    return n_->value.v[0];
  }

 private:
  std::shared_ptr<Node<T>> n_;
};

/// Builds an op node. Skips recording when grad mode is off or no input needs
/// gradients, in which case the result is a plain constant leaf.
template <class T>
Var<T> make_op(TensorT<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward,
               const char* op) {
  bool track = GradMode::enabled();
  if (track) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    track = any;
  }
  if (!track) return Var<T>(std::move(value), false);
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  node->op = op;
  return Var<T>::from_node(std::move(node));
}

namespace detail {

template <class T>
std::vector<std::shared_ptr<Node<T>>> topo_order(const Var<T>& root) {
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS; graphs can be deep for double-backprop passes.
  std::vector<std::pair<std::shared_ptr<Node<T>>, size_t>> stack;
  if (!root.defined()) return order;
  stack.emplace_back(root.node_ptr(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      const auto& in = node->inputs[idx++];
      if (in.defined() && in.requires_grad() && !seen.count(in.node())) {
        seen.insert(in.node());
        stack.emplace_back(in.node_ptr(), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // inputs before users
}

template <class T>
Var<T> add_grads(const Var<T>& a, const Var<T>& b);

/// Core reverse-mode sweep. Returns gradients for every reachable node that
/// requires grad. `create_graph` makes the produced gradients differentiable.
template <class T>
std::unordered_map<Node<T>*, Var<T>> compute_grads(const Var<T>& root, bool create_graph) {
  require(root.defined() && root.numel() == 1, ErrorKind::ShapeError,
          "backward() expects a scalar root");
  auto order = topo_order(root);
  std::unordered_map<Node<T>*, Var<T>> grads;
  GradModeGuard guard(create_graph);
  grads[root.node()] = Var<T>(TensorT<T>::ones({1}));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = it->get();
    auto found = grads.find(node);
    if (found == grads.end() || !node->backward) continue;
    Var<T> self = Var<T>::from_node(*it);
    std::vector<Var<T>> input_grads = node->backward(self, found->second);
    for (size_t i = 0; i < node->inputs.size(); ++i) {
      const auto& in = node->inputs[i];
      if (!in.defined() || !in.requires_grad()) continue;
      if (i >= input_grads.size() || !input_grads[i].defined()) continue;
      auto slot = grads.find(in.node());
      if (slot == grads.end()) {
        grads.emplace(in.node(), input_grads[i]);
      } else {
        slot->second = add_grads(slot->second, input_grads[i]);
      }
    }
  }
  return grads;
}

}  // namespace detail

/// Accumulates gradients into the `.grad` slot of every reachable leaf.
template <class T>
void backward(const Var<T>& root, bool create_graph = false) {
  auto grads = detail::compute_grads(root, create_graph);
  GradModeGuard guard(create_graph);
  for (auto& [node, g] : grads) {
    if (!node->backward && node->requires_grad) {
      node->grad = node->grad.defined() ? detail::add_grads(node->grad, g) : g;
    }
  }
}

/// Functional gradient: returns d root / d wrt[i] without touching `.grad`.
/// `wrt` entries may be interior nodes (e.g. an interpolated input batch).
template <class T>
std::vector<Var<T>> grad(const Var<T>& root, const std::vector<Var<T>>& wrt,
                         bool create_graph = false) {
  auto grads = detail::compute_grads(root, create_graph);
  std::vector<Var<T>> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto it = grads.find(w.node());
    if (it != grads.end()) {
      out.push_back(it->second);
    } else {
      out.push_back(Var<T>(TensorT<T>::zeros(w.shape())));
    }
  }
  return out;
}

}  // namespace periogan::nn
