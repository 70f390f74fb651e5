#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cardiosynth::nn {

/// NCHW extent. Dense vectors use (n, features, 1, 1).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::size_t sample() const { return static_cast<std::size_t>(c) * plane(); }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Reads this node's grad and accumulates into inputs[i]->grad.
  std::function<void(Node&)> backward;

  float* grad_data() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
    return grad.data();
  }
};

}  // namespace detail

/// Reference-semantics handle to a value in the autograd graph.
///
/// Ops record their inputs and a backward closure when gradient recording
/// is enabled and some input requires a gradient. Leaves created with
/// `requires_grad` accumulate gradients across backward calls.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape s, bool requires_grad = false);
  static Tensor full(Shape s, float v, bool requires_grad = false);
  static Tensor from(Shape s, std::vector<float> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::span<float> data() { return node_->value; }
  std::span<const float> data() const { return node_->value; }
  const float* ptr() const { return node_->value.data(); }
  float* ptr() { return node_->value.data(); }
  float item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer, allocated (zeroed) on first access.
  std::span<float> grad() {
    node_->grad_data();
    return node_->grad;
  }
  std::span<const float> grad() const { return node_->grad; }
  void zero_grad();

  /// Same values, no graph history, no gradient.
  Tensor detach() const;

  /// Backpropagates from a scalar output with seed gradient 1.
  void backward();
  /// Backpropagates with an explicit seed gradient of this tensor's size.
  void backward(std::span<const float> seed);

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

/// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {
/// Creates an op result; history is attached only when needed.
Tensor make_result(Shape shape, std::vector<float> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward);
}  // namespace detail

}  // namespace cardiosynth::nn
