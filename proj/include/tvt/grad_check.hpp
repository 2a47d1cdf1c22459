#pragma once

#include "tvt/ops.hpp"

#include <cstdint>
#include <functional>

namespace tvt {

/// Builds the objective on the given tape. The replay pointer must be
/// threaded through to every gradient-reversal and stop-gradient site so
/// finite differences probe the same vector field the tape reports.
using Objective = std::function<Var(Tape&, GradCheckReplay*)>;

struct GradCheckOptions {
  double step = 1e-5;       // central-difference half-step
  double tolerance = 1e-4;  // max allowed relative error
  double floor = 1e-8;      // denominator floor for the relative error
  /// When both the analytic and numeric values sit below this magnitude the
  /// difference quotient is dominated by cancellation noise, so the
  /// coordinate is skipped and another one is drawn instead.
  double skip_below = 1e-6;
  Index samples = 200;  // coordinates to compare (after skips)
  std::uint64_t seed = 7;
};

struct CoordinateReport {
  std::string param;
  Index offset = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  Index total_coordinates = 0;
  Index checked = 0;
  Index skipped = 0;
  double max_rel_error = 0.0;
  CoordinateReport worst;
  std::vector<CoordinateReport> checked_coords;  // every compared coordinate
  std::vector<CoordinateReport> failures;
  bool ok = false;
};

/// Compares tape gradients against central finite differences on a random
/// sample of parameter coordinates. The objective is evaluated once with
/// backward to collect analytic gradients, then twice per sampled
/// coordinate at theta +/- step with the replay in fetch mode.
GradCheckReport check_gradients(ParameterStore& params, const Objective& objective,
                                const GradCheckOptions& opts = {});

/// Identity forward whose backward multiplies the incoming gradient by
/// `factor`. Deliberately wrong for factor != 1; exists so the checker's
/// sensitivity can itself be exercised.
Var scale_backward_only(Var x, double factor);

}  // namespace tvt
