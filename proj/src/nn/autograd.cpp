#include "uda/nn/autograd.hpp"

#include <cassert>
#include <unordered_set>

namespace uda::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

Var parameter(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  n->needs_grad = true;
  return n;
}

Var make_node(Tensor v, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  if (g_grad_enabled) {
    for (const auto& p : parents)
      if (p->needs_grad) {
        n->needs_grad = true;
        break;
      }
  }
  if (n->needs_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

void backward(const Var& root) {
  assert(root->value.size() == 1);
  if (!root->needs_grad) return;

  // Iterative post-order topological sort over nodes that need gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  assert(dst.size() == src.size());
  double* d = dst.data();
  const double* s = src.data();
  const std::int64_t n = dst.size();
  for (std::int64_t i = 0; i < n; ++i) d[i] += s[i];
}

}  // namespace uda::nn
