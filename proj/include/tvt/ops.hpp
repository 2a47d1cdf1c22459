#pragma once

#include "tvt/tape.hpp"

#include <map>
#include <string>
#include <vector>

namespace tvt {

/// Support for finite-difference verification of objectives that contain
/// non-gradient pieces (gradient reversal, stop-gradients). During the
/// recording pass the replay captures the values those pieces produced;
/// during subsequent fetch passes the captured values are substituted so
/// the perturbed objective is an honest antiderivative of the tape's
/// vector field at the recording point.
class GradCheckReplay {
 public:
  enum class Mode { record, fetch };

  Mode mode() const { return mode_; }
  void start_fetching() { mode_ = Mode::fetch; }

  /// Record mode: stores `current` under `key` (duplicate keys rejected so
  /// collisions within one forward pass surface early). Fetch mode: returns
  /// the stored tensor, which must match `current`'s shape.
  const Tensor& store_or_fetch(const std::string& key, const Tensor& current);

 private:
  Mode mode_ = Mode::record;
  std::map<std::string, Tensor> slots_;
};

// ---- differentiable tape ops ----------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var hadamard(Var a, Var b);
/// Adds a length-m row vector to every row of an n-by-m input.
Var add_rowvec(Var x, Var b);
/// x * w + b with b broadcast across rows.
Var linear(Var x, Var w, Var b);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Index begin, Index count);
Var slice_cols(Var a, Index begin, Index count);
Var row(Var a, Index i);
Var softmax_rows(Var a);
/// Row-wise normalization over features with learned per-feature gain/bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);
/// Tanh-approximation gaussian error linear unit.
Var gelu(Var a);
Var sigmoid(Var a);
Var log(Var a);
/// Elementwise x*ln(x) with the 0*ln(0) = 0 convention; inputs must be >= 0.
Var xlogx(Var a);
/// Values outside [lo, hi] are pinned and receive zero gradient.
Var clamp(Var a, double lo, double hi);
Var sum(Var a);
Var mean(Var a);

/// Gradient reversal: identity forward, -lambda flip backward. With an
/// active replay in fetch mode the forward value becomes the linearization
/// (1+lambda)*x0 - lambda*x around the recorded x0, whose true derivative
/// equals the reversed gradient.
Var grl(Var x, double lambda, GradCheckReplay* replay = nullptr,
        const std::string& key = {});

/// Detached copy of x (constant on the tape). With an active replay the
/// detached values are frozen at their recorded state across fetch passes.
Var stop_gradient(Var x, GradCheckReplay* replay = nullptr,
                  const std::string& key = {});

/// Mean softmax cross-entropy of n-by-k logits against integer labels.
Var cross_entropy_with_logits(Var logits, const std::vector<int>& labels);

/// Mean binary cross-entropy of probabilities against constant targets in
/// [0, 1]. Probabilities are clamped to [eps, 1-eps] before the logs.
Var binary_cross_entropy(Var probs, const Tensor& targets, double eps = 1e-7);

// ---- plain (non-tape) math helpers -----------------------------------------

/// Shannon entropy of a distribution in the given log base. Terms are
/// accumulated in sorted order, so any permutation of the same values gives
/// a bit-identical result. Validates nonnegativity and unit sum.
double entropy(const std::vector<double>& p, double base);

/// Entropy of {p, 1-p} in bits; p must lie in [0, 1]. Maps 0 and 1 to 0
/// and 0.5 to the maximum of 1.
double binary_entropy(double p);

}  // namespace tvt
