#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "uda/nn/tensor.hpp"

namespace uda::nn {

class Node;
using Var = std::shared_ptr<Node>;

/// One vertex of a dynamically built computation graph. The forward value is
/// materialized at construction; backward_fn scatters this node's grad into
/// its parents' grads.
class Node {
 public:
  Tensor value;
  Tensor grad;  // empty until ensure_grad()
  bool requires_grad = false;
  bool needs_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    return grad;
  }
};

/// Leaf with no gradient tracking.
Var constant(Tensor v);
/// Trainable leaf; gradients accumulate across backward passes until cleared.
Var parameter(Tensor v);
/// Interior node. Parents and backward_fn are dropped when no parent needs
/// gradients (or grads are globally disabled), so inference builds no graph.
Var make_node(Tensor v, std::vector<Var> parents, std::function<void(Node&)> fn);

/// Reverse-mode sweep from a scalar root. No-op when the root carries no graph.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph construction in scope (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// dst += src, elementwise.
void add_into(Tensor& dst, const Tensor& src);

}  // namespace uda::nn
