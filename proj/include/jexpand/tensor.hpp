#pragma once

// Dense float32 tensor with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a shared node. Operations that receive at
// least one input with requires_grad() record a backward closure on their
// result; Tensor::backward() walks the recorded graph in reverse
// topological order and then releases it, so every training step builds a
// fresh tape. Leaf tensors (parameters, inputs) keep their accumulated
// gradients until zero_grad().

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace jexpand {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;

  std::span<float> grad_buffer();  // allocates zeros on first use
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  /// Throws NonFiniteError when any value is NaN/Inf and ShapeError when
  /// the data length disagrees with the shape.
  static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const;

  std::span<const float> data() const;
  /// In-place access for optimizer updates and initializers only.
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  /// Backpropagate from a single-element tensor (seed 1).
  void backward() const;
  /// Backpropagate with an explicit seed of the same size as this tensor.
  void backward(std::span<const float> seed) const;

  /// Same values, no graph history, requires_grad false.
  Tensor detach() const;
  /// Deep copy of values (no graph).
  Tensor clone() const;
  Tensor reshape(Shape shape) const;

  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// True while operations record backward closures (default on).
bool grad_enabled();

/// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// When enabled every operation scans its output for NaN/Inf and throws.
void set_debug_checks(bool enabled);
bool debug_checks();

namespace detail {

using BackwardFn = std::function<void(Node&)>;

/// Wrap freshly computed values as an op result. Records `backward` only
/// when grad mode is on and some input requires grad.
Tensor make_result(Shape shape, std::vector<float> data, std::initializer_list<Tensor> inputs,
                   BackwardFn backward);
Tensor make_result(Shape shape, std::vector<float> data, const std::vector<Tensor>& inputs,
                   BackwardFn backward);

}  // namespace detail

}  // namespace jexpand
