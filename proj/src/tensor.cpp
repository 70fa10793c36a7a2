#include "jexpand/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "jexpand/error.hpp"

namespace jexpand {

namespace {

thread_local bool g_grad_enabled = true;
#ifdef NDEBUG
bool g_debug_checks = false;
#else
bool g_debug_checks = true;
#endif

void check_finite(std::span<const float> values, const char* what) {
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string("non-finite value in ") + what);
    }
  }
}

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks() { return g_debug_checks; }

namespace detail {

std::span<float> Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad;
}

static void validate_shape(const Shape& shape, std::size_t length) {
  for (auto e : shape) {
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (static_cast<std::size_t>(shape_numel(shape)) != length) {
    throw ShapeError("shape " + shape_to_string(shape) + " does not match data length " +
                     std::to_string(length));
  }
}

template <typename Range>
static Tensor make_result_impl(Shape shape, std::vector<float> data, const Range& inputs,
                               BackwardFn backward) {
  if (g_debug_checks) check_finite(data, "operation result");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) {
      if (t.defined() && t.node()->requires_grad) {
        needs_grad = true;
        break;
      }
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->is_leaf = false;
    for (const Tensor& t : inputs) {
      if (t.defined() && t.node()->requires_grad) node->inputs.push_back(t.node());
    }
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<float> data, std::initializer_list<Tensor> inputs,
                   BackwardFn backward) {
  return make_result_impl(std::move(shape), std::move(data), inputs, std::move(backward));
}

Tensor make_result(Shape shape, std::vector<float> data, const std::vector<Tensor>& inputs,
                   BackwardFn backward) {
  return make_result_impl(std::move(shape), std::move(data), inputs, std::move(backward));
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  if (!std::isfinite(value)) throw NonFiniteError("Tensor::full with non-finite value");
  auto n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<float> data(n, value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
  detail::validate_shape(shape, data.size());
  check_finite(data, "Tensor::from_data");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(node_->shape));
  }
  return node_->shape[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node_->data.size()); }

std::span<const float> Tensor::data() const { return node_->data; }
std::span<float> Tensor::mutable_data() { return node_->data; }

float Tensor::item() const {
  if (node_->data.size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_to_string(node_->shape));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_->is_leaf) throw InvalidArgument("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const float> Tensor::grad() const { return node_->grad; }
std::span<float> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::backward() const {
  if (node_->data.size() != 1) {
    throw ShapeError("backward() without a seed needs a single-element tensor, got " +
                     shape_to_string(node_->shape));
  }
  const float one = 1.0f;
  backward(std::span<const float>(&one, 1));
}

void Tensor::backward(std::span<const float> seed) const {
  if (seed.size() != node_->data.size()) throw ShapeError("backward seed size mismatch");
  if (!node_->requires_grad) throw InvalidArgument("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order of the recorded graph.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      const auto& child = n->inputs[next++];
      if (visited.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(std::move(n));
      stack.pop_back();
    }
  }

  auto root_grad = node_->grad_buffer();
  for (std::size_t i = 0; i < seed.size(); ++i) root_grad[i] += seed[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = it->get();
    if (n->backward && !n->grad.empty()) n->backward(*n);
    if (!n->is_leaf) {
      n->backward = nullptr;
      n->inputs.clear();
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

Tensor Tensor::clone() const { return detach(); }

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_to_string(node_->shape) + " to " + shape_to_string(shape));
  }
  auto src = node_;
  return detail::make_result(std::move(shape), node_->data, {*this}, [src](detail::Node& out) {
    auto g = src->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
  });
}

}  // namespace jexpand
