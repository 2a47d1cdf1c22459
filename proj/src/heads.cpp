#include "tvt/heads.hpp"

#include <cmath>

namespace tvt {

Var discriminate(Var features, const DiscriminatorVars& d) {
  Var h1 = gelu(linear(features, d.w1, d.b1));
  Var h2 = gelu(linear(h1, d.w2, d.b2));
  return sigmoid(linear(h2, d.w3, d.b3));
}

double grl_schedule(double progress) {
  if (progress < 0.0 || progress > 1.0) {
    throw ValueError("schedule progress " + std::to_string(progress) + " outside [0, 1]");
  }
  return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0;
}

}  // namespace tvt
