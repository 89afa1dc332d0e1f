#pragma once

// Dense row-major tensor with an optional reverse-mode gradient tape.
//
// A BasicTensor is a shared handle: copies alias the same storage, which is
// what lets the tape hand gradients back to the parameters a model holds.
// Use clone() for an independent copy.

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dcnet/errors.hpp"

namespace dcnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
  const Tape<T>* tape = nullptr;  // producing tape; null for leaves

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T{0});
    return grad;
  }
};

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

}  // namespace detail

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0}) : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    validate(shape);
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
  }

  BasicTensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    validate(shape);
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                           shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape), T{0}); }
  static BasicTensor ones(Shape shape) { return BasicTensor(std::move(shape), T{1}); }
  static BasicTensor scalar(T v) { return BasicTensor(Shape{1}, v); }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= ndim()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return impl_->shape[axis];
  }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  std::vector<T>& values() { return impl_->data; }
  const std::vector<T>& values() const { return impl_->data; }

  T item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  T& operator[](std::size_t i) { return impl_->data[i]; }
  const T& operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  /// Marks a leaf as trainable. Tensors produced on a tape cannot be re-flagged.
  BasicTensor& set_requires_grad(bool flag) {
    if (impl_->tape != nullptr) throw AutogradError("set_requires_grad on a non-leaf tensor");
    impl_->requires_grad = flag;
    return *this;
  }
  bool is_leaf() const { return impl_->tape == nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> grad() { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  /// Independent copy without gradient history.
  BasicTensor clone() const { return BasicTensor(shape(), values()); }

  /// Same storage semantics as clone(): the result never accumulates gradient.
  BasicTensor detach() const { return clone(); }

  bool same_storage(const BasicTensor& other) const { return impl_ == other.impl_; }

  // Internal handle used by ops and the tape.
  const detail::ImplPtr<T>& impl() const { return impl_; }
  static BasicTensor wrap(detail::ImplPtr<T> impl) {
    BasicTensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  static void validate(const Shape& shape) {
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] == 0) throw DimensionError("tensor: extent of axis " + std::to_string(i) + " is zero");
    }
  }

  detail::ImplPtr<T> impl_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Append-only record of differentiable operations.
///
/// Ops executed while a TapeScope is active append a node whenever at least one
/// input requires a gradient. backward() walks the nodes once in reverse
/// append order; a tape can be consumed only once.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<T>& grad_out)>;

  struct Node {
    std::string_view op;
    std::vector<detail::ImplPtr<T>> inputs;
    detail::ImplPtr<T> output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string_view op, std::vector<detail::ImplPtr<T>> inputs, const detail::ImplPtr<T>& output,
              BackwardFn fn) {
    if (consumed_) throw AutogradError("recording onto a tape that was already consumed by backward()");
    output->requires_grad = true;
    output->tape = this;
    nodes_.push_back(Node{op, std::move(inputs), output, std::move(fn)});
  }

  void backward(const BasicTensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw AutogradError("backward() needs a scalar loss");
    }
    if (loss.impl()->tape != this) throw AutogradError("backward(): loss is detached from this tape");
    if (consumed_) throw AutogradError("backward() called twice on the same tape; re-run forward first");
    consumed_ = true;
    loss.impl()->grad_buffer()[0] += T{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output->grad.empty()) continue;
      it->backward(it->output->grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  void clear() {
    nodes_.clear();
    consumed_ = false;
  }

 private:
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename T>
Tape<T>*& active_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

/// Makes `tape` the recording target for the current thread for its lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(active_tape<T>()) { active_tape<T>() = &tape; }
  ~TapeScope() { active_tape<T>() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Suspends recording (inference) for its lifetime.
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(active_tape<T>()) { active_tape<T>() = nullptr; }
  ~NoGradScope() { active_tape<T>() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

}  // namespace dcnet
