#pragma once

#include "tvt/ops.hpp"

namespace tvt {

/// Tape handles for one domain discriminator: a two-hidden-layer perceptron
/// input_dim -> input_dim -> input_dim/2 -> 1 with GELU activations and a
/// logistic output.
struct DiscriminatorVars {
  Var w1, b1;
  Var w2, b2;
  Var w3, b3;
};

/// Maps n feature rows to n source-domain probabilities (n x 1), each
/// strictly inside (0, 1) for finite input.
Var discriminate(Var features, const DiscriminatorVars& d);

/// Adversarial ramp 2/(1+exp(-10p)) - 1 on progress p in [0, 1]:
/// 0 at the start of training, saturating towards 1.
double grl_schedule(double progress);

}  // namespace tvt
