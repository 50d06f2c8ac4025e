#pragma once

#include <array>
#include <utility>
#include <vector>

#include "simlab/graph.hpp"

namespace simlab {

/// Known deterministic signal in Gaussian background noise plus independent
/// quantization noise (diagonal covariance from the bit allocation).
struct DeterministicSignalModel {
  Vector signal;     // s
  Matrix noise_cov;  // C_n, SPD
  Vector quant_var;  // diagonal of C_q (zeros allowed)

  void validate() const;
  Matrix total_cov() const;  // C_n + diag(quant_var)
};

/// Matched-filter statistic T(x) = s' C^-1 x with C = C_n + C_q.
double matched_filter_statistic(const DeterministicSignalModel& model,
                                const Vector& x);

/// Closed-form detection probability Q[Q^-1(pfa) - sqrt(s' C^-1 s)].
double detection_probability(const DeterministicSignalModel& model,
                             double pfa);

/// Per-node local detector quality and decision.
struct LocalDecisionProfile {
  Vector p_miss;        // in (0,1)
  Vector p_false;       // in (0,1)
  std::vector<int> decisions;  // u_i in {0,1}

  void validate() const;
  int size() const { return static_cast<int>(p_miss.size()); }
};

struct FusionResult {
  double statistic;   // sum of weights over deciding nodes
  double threshold;   // log[eta * prod (1-P_Fi)/P_Mi]
  bool decide_h1;     // statistic >= threshold (ties go to H1)
  Vector weights;     // log[(1-P_Mi)(1-P_Fi)/(P_Mi P_Fi)]
};

/// Reliability-weighted fusion of independent binary decisions.
FusionResult chair_varshney_fuse(const LocalDecisionProfile& profile,
                                 double eta);

/// Bayesian cost table C[i][j][k]: detector 1 decides H_i, detector 2
/// decides H_j, truth is H_k.
using CostTable = std::array<std::array<std::array<double, 2>, 2>, 2>;

/// Two-sensor scalar Gaussian observation model: x_i ~ N(0, sigma^2) under
/// H0 and N(mean_i, sigma^2) under H1, conditionally independent.
struct TwoSensorGaussianModel {
  double mean1 = 1.0;
  double mean2 = 1.0;
  double sigma = 1.0;
};

/// Likelihood-ratio threshold of sensor 1 when sensor 2 applies a
/// likelihood-ratio test with threshold t2. The defining integrals over x2
/// are evaluated by adaptive quadrature truncated at ten noise deviations.
double tenney_sandell_threshold(const CostTable& costs, double p0, double p1,
                                const TwoSensorGaussianModel& model,
                                double t2);

/// Same expression seen from sensor 2 (roles of the cost indices swapped).
double tenney_sandell_threshold_peer(const CostTable& costs, double p0,
                                     double p1,
                                     const TwoSensorGaussianModel& model,
                                     double t1);

/// Alternating updates of the coupled (t1, t2) equations until both move
/// less than 1e-8. Throws NoFixedPoint when the iteration does not settle.
std::pair<double, double> fixed_point_thresholds(
    const CostTable& costs, double p0, double p1,
    const TwoSensorGaussianModel& model, int max_iters = 500);

/// Average consensus over local log-likelihood ratios; every node ends with
/// (1/n) sum log LR_i, so scaling by n recovers the global log-LR.
Vector consensus_log_lr(const Vector& local_log_lrs, const Graph& g,
                        double tol = 1e-10);

/// Initialization for fusing binary decisions by consensus: node i starts
/// from its Chair-Varshney weight times its decision.
Vector fusion_initial_states(const LocalDecisionProfile& profile);

}  // namespace simlab
