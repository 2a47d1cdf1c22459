#pragma once

#include "tvt/tensor.hpp"

namespace tvt {

/// Per-patch transferability: the base-2 entropy of the patch
/// discriminator's source-probability, so a maximally confused patch
/// (p = 0.5) scores 1 and a perfectly domain-revealing patch (p = 0 or 1)
/// scores 0. Input is R probabilities (any shape of size R); output is a
/// length-R tensor. Gradients never flow through this path — the caller
/// feeds the result back in as a constant.
Tensor patch_transferability(const Tensor& probs);

/// Attention mask for the transferability-adapted block: an
/// (R+1)x(R+1) matrix of ones whose first row is [1, t_1 .. t_R]. Applied
/// as a Hadamard factor after the row softmax, it reweights only the class
/// token's attention row and never its self-connection.
Tensor class_row_mask(const Tensor& t);

/// Reference single-head evaluation of the reweighted class-row attention:
/// w = softmax(q K^T / sqrt(d_head)), w' = w o [1; t], output = w' V.
/// Plain Eigen arithmetic, used to cross-check the taped path.
Eigen::ArrayXd tsa_reference(const Eigen::ArrayXd& q_class, const MatrixRM& keys,
                             const MatrixRM& values, const Eigen::ArrayXd& t);

}  // namespace tvt
