// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "echoone/core/tensor.hpp"

namespace echoone {

// Reverse-mode autodiff over Tensor<T>. Graphs are built define-by-run by the
// free functions in ops.hpp; each op node keeps a closure that pulls the
// node's gradient into its parents. Parameters are long-lived leaf nodes, the
// rest of the graph is dropped when the loss Var goes out of scope.

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first accumulation
  std::vector<Var<T>> parents;
  std::function<void(Node<T>&)> backward_fn;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor<T>::zeros(value.shape());
  }
  void accumulate(const ArrayX<T>& g) {
    ensure_grad();
    grad.array() += g;
  }
  void zero_grad() {
    if (grad.size() > 0) grad.array().setZero();
  }
};

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

/// Cuts the graph: the result shares the value but receives no gradient.
template <typename T>
Var<T> detach(const Var<T>& v) {
  return make_leaf<T>(v->value, false);
}

namespace detail {

template <typename T>
void topo_sort(const Var<T>& root, std::vector<Node<T>*>& order) {
  // Iterative post-order DFS; only nodes that require grad matter.
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

/// Backpropagate from a scalar root; seeds d(root)/d(root) = 1.
template <typename T>
void backward(const Var<T>& root) {
  if (!root->requires_grad) return;
  std::vector<Node<T>*> order;
  detail::topo_sort(root, order);
  root->ensure_grad();
  root->grad.array().setConstant(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad.size() > 0) n->backward_fn(*n);
  }
}

}  // namespace echoone
