#pragma once

#include "simlab/allocation.hpp"

namespace simlab {

/// Independent iterative solver for the estimation-allocation problem:
/// augmented-Lagrangian outer loop around projected gradient on p >= 0.
/// Shares no code with the closed-form KKT path.
Vector estimation_allocation_oracle(const ChannelSet& ch,
                                    double epsilon_target,
                                    int outer_iters = 60,
                                    int inner_iters = 4000);

/// Independent solver for the detection allocation: projected gradient on
/// the simplex-like set {p >= 0, sum p <= total_power}.
Vector detection_allocation_oracle(const ChannelSet& ch, const Vector& signal,
                                   double total_power, int iters = 20000);

}  // namespace simlab
