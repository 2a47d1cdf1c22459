#pragma once

#include "tvt/ops.hpp"

namespace tvt {

/// Mutual information between examples and predicted classes for one batch
/// of prediction rows: I = H(mean row) - mean(H(row)), natural log. Rows
/// must be nonnegative and sum to 1 within 1e-9. The result is invariant
/// bit-for-bit under any permutation of the class columns.
double mutual_information(const Tensor& probs);

/// Tape route over already-normalized probability rows (e.g. softmax_rows
/// output). Value matches the plain overload up to summation order; the
/// backward pass flows into whatever produced the rows.
Var mutual_information(Var probs);

}  // namespace tvt
