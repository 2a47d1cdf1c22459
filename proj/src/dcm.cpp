#include "tvt/dcm.hpp"

#include <vector>

namespace tvt {

namespace {

std::vector<double> row_as_vector(ConstMatMap m, Index i) {
  std::vector<double> out(static_cast<size_t>(m.cols()));
  for (Index k = 0; k < m.cols(); ++k) out[static_cast<size_t>(k)] = m(i, k);
  return out;
}

}  // namespace

double mutual_information(const Tensor& probs) {
  if (probs.size() == 0) throw ValueError("mutual_information: empty batch");
  ConstMatMap m = probs.matrix();
  const Index n = m.rows();
  const Index k = m.cols();

  // entropy() re-validates each row (nonnegative, unit sum within 1e-9) and
  // accumulates its terms in sorted order, which is what makes the whole
  // expression invariant under column permutations.
  double row_entropy_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    row_entropy_sum += entropy(row_as_vector(m, i), std::exp(1.0));
  }

  std::vector<double> marginal(static_cast<size_t>(k), 0.0);
  for (Index c = 0; c < k; ++c) {
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) acc += m(i, c);
    marginal[static_cast<size_t>(c)] = acc / static_cast<double>(n);
  }

  return entropy(marginal, std::exp(1.0)) - row_entropy_sum / static_cast<double>(n);
}

Var mutual_information(Var probs) {
  Tape& tape = *probs.tape;
  const Index n = probs.rows();
  if (n == 0) throw ValueError("mutual_information: empty batch");

  // Batch marginal as a 1/n-weighted row combination, so the gradient of
  // H(marginal) distributes back over every example.
  Var weights = tape.constant(Tensor::full({1, n}, 1.0 / static_cast<double>(n)));
  Var marginal = matmul(weights, probs);

  Var neg_h_marginal = sum(xlogx(marginal));
  Var neg_mean_row_h = scale(sum(xlogx(probs)), 1.0 / static_cast<double>(n));
  return sub(neg_mean_row_h, neg_h_marginal);
}

}  // namespace tvt
