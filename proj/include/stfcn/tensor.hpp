#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stfcn/errors.hpp"

namespace stfcn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
  os << ']';
  return os.str();
}

inline Index shape_size(const Shape& shape) {
  if (shape.empty()) throw ShapeError("invalid shape: no extents");
  Index n = 1;
  for (Index e : shape) {
    if (e < 1) throw ShapeError("invalid shape " + to_string(shape) + ": extents must be >= 1");
    n *= e;
  }
  return n;
}

/**
 * Dense row-major N-dimensional array. The flat buffer is an Eigen column
 * vector, so whole-tensor arithmetic goes through Eigen array expressions and
 * sub-blocks can be mapped as matrices without copying.
 *
 * Axis conventions are fixed by the call site: demand volumes are
 * [rows, cols, time], 3D feature maps [rows, cols, time, channels] and 2D
 * feature maps [rows, cols, channels].
 */
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                       to_string(shape_));
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Vector::Map(values.begin(), static_cast<Index>(values.size()))) {}

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty(); }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }
  Scalar* ptr() noexcept { return data_.data(); }
  const Scalar* ptr() const noexcept { return data_.data(); }

  Scalar& operator[](Index flat) { return data_[flat]; }
  Scalar operator[](Index flat) const { return data_[flat]; }

  template <typename... Ix>
  Scalar& operator()(Ix... ix) {
    return data_[offset(ix...)];
  }
  template <typename... Ix>
  Scalar operator()(Ix... ix) const {
    return data_[offset(ix...)];
  }

  template <typename... Ix>
  Index offset(Ix... ix) const {
    const Index idx[] = {static_cast<Index>(ix)...};
    Index off = 0;
    for (std::size_t k = 0; k < sizeof...(ix); ++k) off = off * shape_[k] + idx[k];
    return off;
  }

  /// Same data, new shape. Throws ShapeError when the element counts differ.
  Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }
  Tensor reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(data_)); }

  void set_zero() { data_.setZero(); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  Vector data_;
};

using Tensord = Tensor<double>;

template <typename Scalar = double>
Tensor<Scalar> zeros(Shape shape) {
  return Tensor<Scalar>(std::move(shape));
}

enum class BinaryOp { add, sub, mul };
enum class ReduceOp { sum, mean, sumsq };

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

template <typename Scalar>
Tensor<Scalar> elementwise(const Tensor<Scalar>& a, const Tensor<Scalar>& b, BinaryOp op) {
  require_same_shape(a.shape(), b.shape(), "elementwise");
  typename Tensor<Scalar>::Vector out;
  switch (op) {
    case BinaryOp::add: out = a.data() + b.data(); break;
    case BinaryOp::sub: out = a.data() - b.data(); break;
    case BinaryOp::mul: out = a.data().cwiseProduct(b.data()); break;
  }
  return Tensor<Scalar>(a.shape(), std::move(out));
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, BinaryOp::add);
}
template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, BinaryOp::sub);
}
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, BinaryOp::mul);
}

/// Reductions accumulate strictly in flat index order so results do not
/// depend on vectorization width.
template <typename Scalar>
Scalar reduce(const Tensor<Scalar>& a, ReduceOp op) {
  if (a.empty()) throw ShapeError("reduce: empty tensor");
  Scalar acc = 0;
  const Scalar* p = a.ptr();
  if (op == ReduceOp::sumsq) {
    for (Index k = 0; k < a.size(); ++k) acc += p[k] * p[k];
    return acc;
  }
  for (Index k = 0; k < a.size(); ++k) acc += p[k];
  return op == ReduceOp::mean ? acc / static_cast<Scalar>(a.size()) : acc;
}

template <typename Scalar>
Scalar sum(const Tensor<Scalar>& a) {
  return reduce(a, ReduceOp::sum);
}
template <typename Scalar>
Scalar mean(const Tensor<Scalar>& a) {
  return reduce(a, ReduceOp::mean);
}
template <typename Scalar>
Scalar sumsq(const Tensor<Scalar>& a) {
  return reduce(a, ReduceOp::sumsq);
}

/// In-place `dst += src`. Only used on buffers owned by a single thread.
template <typename Scalar>
void accumulate(Tensor<Scalar>& dst, const Tensor<Scalar>& src) {
  require_same_shape(dst.shape(), src.shape(), "accumulate");
  dst.data() += src.data();
}

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& a) {
  return a.data().allFinite();
}

}  // namespace stfcn
