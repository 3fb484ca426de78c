#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include <Eigen/Core>

namespace maskenc {

/// N x C x H x W extents. All tensors in the engine are rank 4.
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  constexpr std::int64_t numel() const { return n * c * h * w; }
  constexpr std::int64_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + "]";
  }
};

/// Accumulator used for inner reductions: float sums run in double.
template <typename Scalar>
using accum_t = std::conditional_t<std::is_same_v<Scalar, float>, double, Scalar>;

template <typename Scalar>
class Tape;

/// Dense NCHW tensor with shared storage.
///
/// Copies are handles onto the same storage, so a parameter held by a model
/// and referenced from a tape node accumulates into one gradient buffer.
/// Use clone() for an independent deep copy.
template <typename Scalar>
class BasicTensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() : BasicTensor(Shape{0, 0, 0, 0}) {}

  explicit BasicTensor(Shape shape) : impl_(std::make_shared<Impl>()) {
    check_extents(shape);
    impl_->shape = shape;
    impl_->data = Array::Zero(shape.numel());
  }

  BasicTensor(Shape shape, Array data) : impl_(std::make_shared<Impl>()) {
    check_extents(shape);
    if (data.size() != shape.numel()) {
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape.str());
    }
    impl_->shape = shape;
    impl_->data = std::move(data);
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(shape); }

  static BasicTensor full(Shape shape, Scalar value) {
    return BasicTensor(shape, Array::Constant(shape.numel(), value));
  }

  const Shape& shape() const { return impl_->shape; }
  std::int64_t numel() const { return impl_->shape.numel(); }

  Array& data() { return impl_->data; }
  const Array& data() const { return impl_->data; }

  Scalar& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return impl_->data[offset(n, c, h, w)];
  }
  Scalar at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return impl_->data[offset(n, c, h, w)];
  }

  /// Scalar value of a single-element tensor.
  Scalar item() const {
    if (numel() != 1) throw std::logic_error("item() on tensor of shape " + shape().str());
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }

  /// Enabling allocates a zero gradient; disabling drops it.
  BasicTensor& set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    if (flag) {
      if (impl_->grad.size() != numel()) impl_->grad = Array::Zero(numel());
    } else {
      impl_->grad.resize(0);
    }
    return *this;
  }

  bool has_grad() const { return impl_->requires_grad && impl_->grad.size() == numel(); }

  const Array& grad() const {
    if (!has_grad()) throw std::logic_error("tensor " + shape().str() + " has no gradient");
    return impl_->grad;
  }
  Array& grad() {
    if (!has_grad()) throw std::logic_error("tensor " + shape().str() + " has no gradient");
    return impl_->grad;
  }

  void zero_grad() {
    if (impl_->requires_grad) impl_->grad = Array::Zero(numel());
  }

  /// Index of the tape node that produced this tensor, if any.
  std::optional<std::size_t> node_id() const { return impl_->node; }

  BasicTensor clone() const {
    BasicTensor copy(shape(), data());
    return copy;
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape(), data().template cast<Other>());
  }

  bool shares_storage(const BasicTensor& other) const { return impl_ == other.impl_; }

 private:
  friend class Tape<Scalar>;

  struct Impl {
    Shape shape;
    Array data;
    Array grad;
    bool requires_grad = false;
    std::optional<std::size_t> node;
    const Tape<Scalar>* tape = nullptr;
  };

  static void check_extents(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
      throw std::invalid_argument("negative extent in shape " + s.str());
    }
  }

  std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    const Shape& s = impl_->shape;
    return ((n * s.c + c) * s.h + h) * s.w + w;
  }

  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace maskenc
