#include "tvt/tam.hpp"

#include "tvt/ops.hpp"

#include <cmath>

namespace tvt {

Tensor patch_transferability(const Tensor& probs) {
  const Index r = probs.size();
  if (r < 1) throw ValueError("patch_transferability needs at least one probability");
  Tensor t(Shape{r});
  for (Index i = 0; i < r; ++i) {
    const double p = probs.values()(i);
    if (p < 0.0 || p > 1.0) {
      throw ValueError("patch probability " + std::to_string(p) + " outside [0, 1]");
    }
    t.values()(i) = binary_entropy(p);
  }
  return t;
}

Tensor class_row_mask(const Tensor& t) {
  const Index r = t.size();
  if (r < 1) throw ValueError("class_row_mask needs at least one transferability");
  Tensor mask = Tensor::full(Shape{r + 1, r + 1}, 1.0);
  MatMap m = mask.matrix();
  for (Index i = 0; i < r; ++i) m(0, i + 1) = t.values()(i);
  return mask;
}

Eigen::ArrayXd tsa_reference(const Eigen::ArrayXd& q_class, const MatrixRM& keys,
                             const MatrixRM& values, const Eigen::ArrayXd& t) {
  const Index n = keys.rows();
  if (t.size() != n - 1) {
    throw ShapeError("tsa_reference got " + std::to_string(t.size()) +
                     " transferabilities for " + std::to_string(n - 1) + " patch tokens");
  }
  if (q_class.size() != keys.cols() || keys.rows() != values.rows() ||
      keys.cols() != values.cols()) {
    throw ShapeError("tsa_reference given inconsistent query/key/value extents");
  }
  Eigen::ArrayXd scores = (keys * q_class.matrix()).array() / std::sqrt(double(keys.cols()));
  Eigen::ArrayXd w = (scores - scores.maxCoeff()).exp();
  w /= w.sum();
  for (Index i = 1; i < n; ++i) w(i) *= t(i - 1);
  return (values.transpose() * w.matrix()).array();
}

}  // namespace tvt
