#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "jaffnet/tensor.hpp"

namespace jaffnet {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-allocated to the value's shape on first use.
  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad.zero(value.shape());
    return grad;
  }
};

/// Handle to a node of the reverse-mode graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;

  static Var constant(Tensor<T> value);
  static Var parameter(Tensor<T> value);

  [[nodiscard]] const Tensor<T>& value() const { return node_->value; }
  /// Direct access for initialization and optimizer updates.
  Tensor<T>& mutable_value() { return node_->value; }
  [[nodiscard]] const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& grad_buffer() { return node_->grad_buffer(); }
  [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
  [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
  [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  [[nodiscard]] const std::shared_ptr<Node<T>>& node() const { return node_; }

  /// Creates a graph node. It records `inputs` and `backward` only when grad
  /// mode is on and at least one input requires a gradient.
  static Var make(Tensor<T> value, std::vector<Var> inputs, std::function<void(Node<T>&)> backward);

 private:
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}
  std::shared_ptr<Node<T>> node_;
};

/// Thread-local switch; while disabled no graph is recorded.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Backpropagates from a single-element root, accumulating into the grads
/// of every reachable node that requires one.
template <typename T>
void backward(const Var<T>& root);

extern template class Var<float>;
extern template class Var<double>;

}  // namespace jaffnet
