#include "cardiosynth/nn/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "cardiosynth/core/error.hpp"

namespace cardiosynth::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape s, bool requires_grad) { return full(s, 0.0f, requires_grad); }

Tensor Tensor::full(Shape s, float v, bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->shape = s;
  n->value.assign(s.numel(), v);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape s, std::vector<float> values, bool requires_grad) {
  if (values.size() != s.numel()) throw ShapeError("tensor data size does not match shape " + s.str());
  auto n = std::make_shared<detail::Node>();
  n->shape = s;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape().str());
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

void Tensor::backward() {
  if (numel() != 1) throw ShapeError("backward() without seed requires a scalar");
  const float one = 1.0f;
  backward(std::span<const float>(&one, 1));
}

void Tensor::backward(std::span<const float> seed) {
  if (seed.size() != numel()) throw ShapeError("backward seed size mismatch");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  // Holds references so nodes outlive the release of their parents' inputs.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->inputs.size()) {
      const auto& child = n->inputs[i++];
      if (child->requires_grad && !visited.contains(child.get())) {
        visited.insert(child.get());
        stack.emplace_back(child.get(), 0);
      }
    } else {
      stack.pop_back();
      order.push_back(stack.empty() ? node_ : stack.back().first->inputs[stack.back().second - 1]);
    }
  }

  float* g = node_->grad_data();
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = it->get();
    if (!n->backward) continue;
    if (!n->grad.empty()) n->backward(*n);
    // Graph is consumed: intermediate buffers are released.
    n->backward = nullptr;
    n->inputs.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

namespace detail {

Tensor make_result(Shape shape, std::vector<float> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(value);
  const bool needs =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& t : inputs) n->inputs.push_back(t.node());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

}  // namespace detail
}  // namespace cardiosynth::nn
