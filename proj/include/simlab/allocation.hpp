#pragma once

#include <utility>
#include <vector>

#include "simlab/graph.hpp"

namespace simlab {

/// Per-sensor channel description for the rate-constrained problems.
/// a_k = h_k^2 / N0 is the channel gain factor, sigma2_k the observation
/// noise variance, and `range` the signal dynamic range A.
struct ChannelSet {
  Vector gain;    // a_k > 0
  Vector sigma2;  // > 0
  double range;   // A > 0

  ChannelSet(Vector gain_, Vector sigma2_, double range_);
  int size() const { return static_cast<int>(gain.size()); }
};

/// Real-valued bits supported by power p on channel factor a:
/// n = 0.5 * log2(1 + p*a).
double bits_from_power(double p, double a);

/// Quantization-noise variance A^2 / (3 * 2^(2n)).
double quantization_variance(double bits, double range);

/// Inverse-variance fusion of unbiased messages. Returns the estimate and
/// the MSE upper bound (sum of inverse variances)^-1.
std::pair<double, double> blue_fused_estimate(const Vector& messages,
                                              const Vector& variances);

struct EstimationAllocation {
  Vector power;
  Vector bits;
  double lambda;     // multiplier at the MSE equality
  double mse_bound;  // achieved (sum 1/(sigma^2+delta^2))^-1
  double total_power;
};

/// Minimum total transmit power subject to the fused MSE bound <= epsilon.
/// Closed-form KKT powers with the multiplier found by monotone bisection.
/// Throws Infeasible (carrying epsilon_min) when sum(1/sigma2) <= 1/epsilon.
EstimationAllocation solve_estimation_allocation(const ChannelSet& ch,
                                                 double epsilon_target);

struct DetectionAllocation {
  Vector power;
  Vector bits;
  double lambda;
  double deflection;  // s' (C_n + C_q)^-1 s at the optimum
  double pd;          // detection probability at the requested pfa
};

/// Maximum-deflection power allocation under a total power budget;
/// pfa only affects the reported detection probability.
DetectionAllocation solve_detection_allocation(const ChannelSet& ch,
                                               const Vector& signal,
                                               double total_power,
                                               double pfa = 1e-2);

/// Constraint slack of the estimation problem at powers p:
/// sum_k 1/(sigma2_k + A^2/(3(1+p_k a_k))) - 1/epsilon.
double estimation_constraint_gap(const ChannelSet& ch, const Vector& power,
                                 double epsilon_target);

/// Deflection objective of the detection problem at powers p.
double detection_deflection(const ChannelSet& ch, const Vector& signal,
                            const Vector& power);

}  // namespace simlab
