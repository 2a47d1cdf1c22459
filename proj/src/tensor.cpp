#include "tvt/tensor.hpp"

#include <utility>

namespace tvt {

Tensor::Tensor(Shape shape, Eigen::ArrayXd values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  const Index want = shape_product(shape_);
  if (values_.size() != want) {
    throw ShapeError("tensor data of length " + std::to_string(values_.size()) +
                     " does not fill shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.values_.setConstant(value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t(Shape{});
  t.values_(0) = value;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  if (r == 0) throw ShapeError("from_rows needs at least one row");
  const Index c = static_cast<Index>(rows.begin()->size());
  Tensor t(Shape{r, c});
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != c) {
      throw ShapeError("from_rows given ragged rows (" + std::to_string(c) + " vs " +
                       std::to_string(row.size()) + " entries)");
    }
    for (double v : row) t.values_(i++) = v;
  }
  return t;
}

Tensor Tensor::row_vector(std::initializer_list<double> v) {
  Tensor t(Shape{1, static_cast<Index>(v.size())});
  Index i = 0;
  for (double x : v) t.values_(i++) = x;
  return t;
}

Index Tensor::dim(Index axis) const {
  if (axis < 0 || axis >= rank()) {
    throw IndexError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape_));
  }
  return shape_[static_cast<size_t>(axis)];
}

double Tensor::scalar_value() const {
  if (size() != 1) {
    throw ShapeError("scalar_value on tensor of shape " + shape_to_string(shape_));
  }
  return values_(0);
}

Index Tensor::rows() const {
  if (rank() <= 1) return 1;
  if (rank() == 2) return shape_[0];
  throw ShapeError("no 2-D view for tensor of shape " + shape_to_string(shape_));
}

Index Tensor::cols() const {
  if (rank() == 0) return 1;
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw ShapeError("no 2-D view for tensor of shape " + shape_to_string(shape_));
}

MatMap Tensor::matrix() { return MatMap(values_.data(), rows(), cols()); }

ConstMatMap Tensor::matrix() const { return ConstMatMap(values_.data(), rows(), cols()); }

Eigen::ArrayXd& Tensor::grad() {
  if (grad_.size() != values_.size()) grad_ = Eigen::ArrayXd::Zero(values_.size());
  return grad_;
}

const Eigen::ArrayXd& Tensor::grad() const {
  if (!has_grad()) {
    throw ValueError("gradient requested for tensor of shape " + shape_to_string(shape_) +
                     " before any backward pass touched it");
  }
  return grad_;
}

MatMap Tensor::grad_matrix() { return MatMap(grad().data(), rows(), cols()); }

void Tensor::zero_grad() {
  if (grad_.size() == values_.size()) grad_.setZero();
}

}  // namespace tvt
