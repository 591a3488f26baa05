#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ppn/errors.hpp"

namespace ppn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major N-d array with an optional gradient buffer of the same shape.
///
/// Rank-3 tensors are read as channel x height x width; the batch axis is
/// implicit (batch size 1) everywhere except batchnorm2d, which also accepts
/// rank 4.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), values_(Array::Constant(checked_size(shape_), fill)) {}

  Tensor(Shape shape, Array values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != checked_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(values_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return values_.size(); }

  // Trailing-axis accessors for C x H x W (or N x C x H x W) layouts.
  Index channels() const { return shape_.at(shape_.size() - 3); }
  Index height() const { return shape_.at(shape_.size() - 2); }
  Index width() const { return shape_.at(shape_.size() - 1); }

  Array& values() { return values_; }
  const Array& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  Scalar& operator()(Index c, Index h, Index w) { return values_[(c * height() + h) * width() + w]; }
  Scalar operator()(Index c, Index h, Index w) const {
    return values_[(c * height() + h) * width() + w];
  }

  /// Row-major matrix view over the whole buffer; rows * cols must equal size().
  MatrixMap matrix(Index rows, Index cols) { return MatrixMap(data(), rows, cols); }
  ConstMatrixMap matrix(Index rows, Index cols) const { return ConstMatrixMap(data(), rows, cols); }

  /// H x W view of channel c of a rank-3 tensor.
  MatrixMap plane(Index c) { return MatrixMap(data() + c * height() * width(), height(), width()); }
  ConstMatrixMap plane(Index c) const {
    return ConstMatrixMap(data() + c * height() * width(), height(), width());
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

  bool has_grad() const { return grad_.has_value(); }
  Array& grad() {
    if (!grad_) grad_ = Array::Zero(values_.size());
    return *grad_;
  }
  const Array& grad() const {
    if (!grad_) throw ShapeError("tensor has no gradient buffer");
    return *grad_;
  }
  void zero_grad() { grad_ = Array::Zero(values_.size()); }
  void drop_grad() { grad_.reset(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, values_.template cast<Other>().eval());
  }

 private:
  static Index checked_size(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_string(shape));
    }
    return shape_size(shape);
  }

  Shape shape_;
  Array values_;
  std::optional<Array> grad_;
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace ppn
