#pragma once

#include "tvt/common.hpp"

#include <initializer_list>

namespace tvt {

/// N-dimensional array of doubles in row-major order, with an optional
/// gradient buffer of the same extent. Values are owned; views into the
/// flat buffer are handed out as Eigen maps.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    values_ = Eigen::ArrayXd::Zero(shape_product(shape_));
  }
  Tensor(Shape shape, Eigen::ArrayXd values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  /// 2-D tensor from nested braces; rows must have equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::initializer_list<double> v);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return values_.size(); }
  Index dim(Index axis) const;
  bool is_scalar() const { return size() == 1; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  Eigen::ArrayXd& values() { return values_; }
  const Eigen::ArrayXd& values() const { return values_; }
  double scalar_value() const;
  bool all_finite() const { return values_.isFinite().all(); }

  /// Rows/cols of the 2-D view; rank-1 tensors are treated as 1×n rows.
  Index rows() const;
  Index cols() const;
  MatMap matrix();
  ConstMatMap matrix() const;

  bool has_grad() const { return grad_.size() == values_.size() && values_.size() > 0; }
  /// Gradient buffer, zero-allocated on first access.
  Eigen::ArrayXd& grad();
  const Eigen::ArrayXd& grad() const;
  MatMap grad_matrix();
  void zero_grad();
  void drop_grad() { grad_.resize(0); }

  /// Identity of this tensor within the tape it was recorded on; -1 if free.
  int tape_id = -1;

 private:
  Shape shape_;
  Eigen::ArrayXd values_;
  Eigen::ArrayXd grad_;
};

}  // namespace tvt
