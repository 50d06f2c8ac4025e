#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "simlab/consensus.hpp"
#include "simlab/errors.hpp"
#include "simlab/graph.hpp"

namespace simlab {

/// Per-node linear observation x_i = A_i theta + v_i, v_i ~ N(0, C_i).
struct NodeLinearModel {
  std::vector<Matrix> mixing;       // A_i, Q x M
  std::vector<Matrix> noise_cov;    // C_i, Q x Q SPD
  std::vector<Vector> measurement;  // x_i, Q
  Vector true_theta;                // synthesis only; may be empty

  int nodes() const { return static_cast<int>(mixing.size()); }
  int param_dim() const { return static_cast<int>(mixing.at(0).cols()); }
  void validate() const;
};

/// Synthesizes a random instance with the given shape; theta entries beyond
/// `zero_from` are forced to zero to exercise the sparse estimators.
NodeLinearModel synthesize_linear_model(int nodes, int obs_dim, int param_dim,
                                        double noise_scale, std::uint64_t seed,
                                        int zero_from = -1);

struct AdmmConfig {
  double rho = 30.0;
  double mu = 0.0;                // l1 weight for the sparse variants
  double outer_tol = 1e-9;
  double consensus_tol = 1e-11;   // inner averaging tolerance
  int max_outer = 5000;
  int max_consensus = 200000;
  double consensus_epsilon = -1.0;  // <0: auto 1/max_degree
  Graph comm_graph{1, false};
  bool random_init = false;
  std::uint64_t init_seed = 0;
};

struct EstimateTrace {
  std::vector<Matrix> theta_per_iter;  // M x N per outer iteration
  std::vector<Vector> z_per_iter;      // consensus variable (when used)
  std::vector<double> disagreement;    // across-node spread per iteration
  Matrix final_theta;                  // M x N
  Vector final_z;                      // sparse estimate for A.4/A.5
  int outer_iterations = 0;
  long cumulative_inner = 0;           // m: counts every consensus iteration
  bool converged = false;
};

struct EstimationNotConverged : Error {
  EstimationNotConverged(const std::string& what, EstimateTrace partial_)
      : Error(what), partial(std::move(partial_)) {}
  EstimateTrace partial;
};

/// Centralized ML for the Gaussian linear model:
/// (sum A' C^-1 A)^-1 (sum A' C^-1 x).
Vector centralized_ml(const NodeLinearModel& model);

/// ADMM with a global consensus variable (inner consensus averaging).
EstimateTrace admm_global_consensus(const NodeLinearModel& model,
                                    const AdmmConfig& cfg);

/// ADMM with neighbor coupling only; no inner consensus loops.
EstimateTrace admm_neighbor(const NodeLinearModel& model,
                            const AdmmConfig& cfg);

/// Locally weighted consensus that converges directly to the global ML
/// estimate.
EstimateTrace consensus_ml(const NodeLinearModel& model,
                           const AdmmConfig& cfg);

/// Scalar soft threshold with dead zone [-mu, mu].
double soft_threshold(double x, double mu);
Vector soft_threshold(const Vector& x, double mu);

/// Consensus lasso: Gaussian model with an l1 prior of weight cfg.mu.
EstimateTrace admm_lasso(const NodeLinearModel& model, const AdmmConfig& cfg);

/// One time step of observations for every node.
struct RlsSnapshot {
  std::vector<Matrix> mixing;
  std::vector<Matrix> noise_cov;
  std::vector<Vector> measurement;
};

struct RlsResult {
  std::vector<EstimateTrace> per_time;  // one trace per time index
  Matrix z_history;                     // M x T sparse estimates over time
};

/// Sparse recursive least squares with forgetting factor beta; information
/// accumulators are updated recursively, never by re-scanning history.
RlsResult rls_sparse(const std::vector<RlsSnapshot>& stream,
                     const AdmmConfig& cfg, double beta);

/// Scalar GMRF observation model x = theta*1 + v, v ~ N(0, A^-1).
struct GmrfScalarModel {
  Matrix precision;  // sparse SPD, zeros off the dependency graph
  Vector x;
  void validate() const;
};

/// Distance-decaying SPD precision on an RGG: a_ij = -c/(1+r_ij) for
/// neighbors, a_ii = 1 + sum_j |a_ij| (diagonal dominance).
GmrfScalarModel synthesize_gmrf(const Graph& rgg, double coupling,
                                double theta, std::uint64_t noise_seed);

/// Exact maximizer of the GMRF likelihood: 1'Ax / 1'A1.
double gmrf_centralized_estimate(const GmrfScalarModel& model);

/// ADMM for the spatially correlated scalar model.
EstimateTrace admm_gmrf(const GmrfScalarModel& model, const AdmmConfig& cfg);

/// Average consensus over per-node statistics B(x_i); every node ends with
/// T(x)/n, and scaling by n recovers T(x).
Vector sufficient_statistic_consensus(const Vector& b_values, const Graph& g,
                                      double tol = 1e-10);

/// Across-node disagreement sum_ij a_ij ||theta_j - theta_i||^2.
double theta_disagreement(const Graph& g, const Matrix& theta);

}  // namespace simlab
