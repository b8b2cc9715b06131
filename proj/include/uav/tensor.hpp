#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "uav/errors.hpp"

namespace uav {

template <class S>
struct Tensor;

// One tape node: the tensors this output was computed from and a closure that
// routes the output gradient into theirs.
template <class S>
struct Node {
  std::vector<Tensor<S>> parents;
  std::function<void(Tensor<S>&)> backward;
};

// Reverse-mode tensor. Copies are shallow: data, grad and tape node are
// shared, so a Tensor behaves as a handle onto one logical array.
template <class S>
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<S>> data;
  std::shared_ptr<std::vector<S>> grad;
  std::shared_ptr<Node<S>> node;
  bool requires_grad = false;

  Tensor() = default;

  static std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw DimensionError("tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<S>>(numel_of(t.shape), S(0));
    t.requires_grad = requires_grad;
    return t;
  }

  static Tensor from_values(std::vector<int> shape, std::vector<S> values, bool requires_grad = false) {
    if (numel_of(shape) != values.size())
      throw DimensionError("tensor: shape/product mismatch with value count");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<S>>(std::move(values));
    t.requires_grad = requires_grad;
    return t;
  }

  template <class U>
  static Tensor from_cast(std::vector<int> shape, const std::vector<U>& values, bool requires_grad = false) {
    std::vector<S> v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) v[i] = static_cast<S>(values[i]);
    return from_values(std::move(shape), std::move(v), requires_grad);
  }

  std::size_t numel() const { return data ? data->size() : 0; }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  S& at(std::size_t i) { return (*data)[i]; }
  const S& at(std::size_t i) const { return (*data)[i]; }

  void ensure_grad() {
    if (!grad) grad = std::make_shared<std::vector<S>>(numel(), S(0));
  }

  void zero_grad() {
    if (grad)
      for (S& g : *grad) g = S(0);
  }

  bool all_finite() const {
    for (S v : *data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Backpropagate from this tensor. Seeds with ones (the usual scalar-loss
  // case), walks the tape in reverse topological order.
  void backward() {
    ensure_grad();
    for (S& g : *grad) g = S(1);
    std::vector<Tensor<S>> order;
    std::unordered_set<const Node<S>*> seen;
    build_topo(*this, seen, order);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Tensor<S>& t = *it;
      if (t.node && t.node->backward) {
        for (Tensor<S>& p : t.node->parents)
          if (p.requires_grad) p.ensure_grad();
        t.node->backward(t);
      }
    }
  }

 private:
  static void build_topo(const Tensor<S>& t, std::unordered_set<const Node<S>*>& seen,
                         std::vector<Tensor<S>>& order) {
    if (!t.node || seen.count(t.node.get())) return;
    seen.insert(t.node.get());
    for (const Tensor<S>& p : t.node->parents) build_topo(p, seen, order);
    order.push_back(t);
  }
};

// Walk the tape upward from `out` and collect the identities (data pointers)
// of every leaf that requires grad. Used by the shared-parameter audit.
template <class S>
void collect_parameter_leaves(const Tensor<S>& out, std::unordered_set<const void*>& leaves) {
  std::unordered_set<const void*> seen;
  std::vector<Tensor<S>> stack{out};
  while (!stack.empty()) {
    Tensor<S> t = stack.back();
    stack.pop_back();
    const void* id = static_cast<const void*>(t.data.get());
    if (seen.count(id)) continue;
    seen.insert(id);
    if (!t.node) {
      if (t.requires_grad) leaves.insert(id);
      continue;
    }
    for (const Tensor<S>& p : t.node->parents) stack.push_back(p);
  }
}

}  // namespace uav
