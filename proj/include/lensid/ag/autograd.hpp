#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lensid/core/tensor.hpp"

namespace lensid::ag {

/// Define-by-run reverse-mode autodiff. Every op builds a Node whose
/// backward_fn scatters the node's gradient into its parents. With gradients
/// disabled, ops keep no parents, so intermediates free as soon as the last
/// reference drops.
template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad; // lazily allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;

  void accumulate(const Tensor<T>& g) {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) grad[i] += g[i];
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.vec().begin(), grad.vec().end(), T(0));
  }
  Tensor<T>& ensure_grad() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
  bool prev;
};

template <class T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <class T>
Var<T> parameter(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

template <class T>
bool any_requires_grad(const std::vector<Var<T>>& vars) {
  for (const auto& v : vars)
    if (v->requires_grad) return true;
  return false;
}

/// Create the result node for an op. Links parents only when a gradient can
/// flow, i.e. grads are enabled and some input requires them.
template <class T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (grad_enabled() && any_requires_grad(parents)) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

/// Reverse-mode sweep from a scalar root. Seeds the root gradient with ones
/// and runs each node's backward_fn in reverse topological order.
template <class T>
void backward(const Var<T>& root) {
  check(root->value.numel() == 1, ErrorKind::shape, "backward root must be a scalar");
  if (!root->requires_grad) return;

  // Iterative DFS topo sort over the subgraph that requires gradients.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node<T>* p = node->parents[next_child++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

} // namespace lensid::ag
