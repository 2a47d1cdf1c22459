#include "tvt/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace tvt {

GradCheckReport check_gradients(ParameterStore& params, const Objective& objective,
                                const GradCheckOptions& opts) {
  if (opts.step <= 0 || opts.samples < 1) {
    throw ValueError("gradient check needs a positive step and at least one sample");
  }
  GradCheckReport report;

  // Analytic pass: one forward with the replay recording, one backward.
  params.zero_grads();
  GradCheckReplay replay;
  {
    Tape tape;
    Var loss = objective(tape, &replay);
    tape.backward(loss);
  }
  replay.start_fetching();

  // Snapshot analytic gradients and enumerate every coordinate.
  std::vector<Eigen::ArrayXd> analytic;
  std::vector<std::pair<size_t, Index>> coords;
  size_t pi = 0;
  for (auto& p : params) {
    analytic.push_back(p->tensor.grad());
    for (Index off = 0; off < p->tensor.size(); ++off) coords.emplace_back(pi, off);
    ++pi;
  }
  report.total_coordinates = static_cast<Index>(coords.size());

  std::mt19937_64 rng(opts.seed);
  std::shuffle(coords.begin(), coords.end(), rng);

  auto evaluate = [&]() {
    Tape tape;
    return objective(tape, &replay).scalar_value();
  };

  std::vector<Parameter*> flat;
  for (auto& p : params) flat.push_back(p.get());

  size_t k = 0;
  while (report.checked < opts.samples && k < coords.size()) {
    const auto [which, off] = coords[k++];
    Parameter& p = *flat[which];
    double& slot = p.tensor.values()(off);
    const double original = slot;
    slot = original + opts.step;
    const double up = evaluate();
    slot = original - opts.step;
    const double down = evaluate();
    slot = original;

    const double numeric = (up - down) / (2.0 * opts.step);
    const double a = analytic[which](off);
    if (std::max(std::abs(a), std::abs(numeric)) < opts.skip_below) {
      ++report.skipped;
      continue;
    }
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
    CoordinateReport cr{p.name, off, a, numeric, rel};
    if (rel >= report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = cr;
    }
    if (rel > opts.tolerance) report.failures.push_back(cr);
    report.checked_coords.push_back(cr);
    ++report.checked;
  }

  report.ok = report.failures.empty() && report.checked > 0;
  return report;
}

Var scale_backward_only(Var x, double factor) {
  Tape& t = *x.tape;
  t.check_owns(x, "scale_backward_only");
  Tensor out(x.shape(), x.tensor().values());
  const int ix = x.id;
  return t.record(std::move(out), {ix}, [ix, factor](Tape& tp, const Node& n) {
    tp.grad_buffer(ix) += factor * n.tensor.grad();
  });
}

}  // namespace tvt
