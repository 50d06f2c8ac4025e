#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/graph.hpp"

namespace simlab {

class Rng;

/// One consensus experiment: x[k+1] = W x[k] with W = I - eps*L.
struct ConsensusRun {
  Graph graph;
  Matrix x0;            // n x m initial states
  double epsilon;       // < 2/lambda_N (undirected), < 1/d_max (digraph)
  int max_iters = 100000;
  double tol = 1e-12;   // relative change between successive iterates
};

struct Trajectory {
  std::vector<Matrix> states;       // recorded states (decimated past 1e4)
  std::vector<int> recorded_iters;  // iteration index of each recorded state
  std::vector<double> disagreement; // psi[k] = ||x[k] - x*||^2 per iteration
  int iterations = 0;
  Matrix limit;
  bool converged = false;
};

struct ConsensusNotConverged : Error {
  ConsensusNotConverged(const std::string& what, Trajectory partial_)
      : Error(what), partial(std::move(partial_)) {}
  Trajectory partial;
};

/// W = I - eps*L. Throws StepTooLarge past the stability bound.
Matrix step_matrix(const Graph& g, double epsilon);

/// Contraction modulus of W on the complement of its fixed space
/// (the largest |eigenvalue| below 1).
double contraction_modulus(const Matrix& w);

/// Ideal consensus. For connected undirected graphs the limit is the
/// arithmetic mean of the initial states.
Trajectory run_consensus(const ConsensusRun& run);

/// Consensus with per-node positive rates c: converges to
/// sum(c_i x_i(0)) / sum(c_i) on connected undirected graphs.
Trajectory weighted_consensus(const ConsensusRun& run, const Vector& c);

enum class LimitKind {
  WeightedConsensus,
  AverageConsensus,
  ClusterConsensus,
  RootValue,
};

std::string to_string(LimitKind k);

struct DirectedLimit {
  LimitKind kind;
  Vector values;                          // predicted limit per node
  std::vector<std::vector<int>> clusters; // root SCCs (ClusterConsensus)
  std::vector<Vector> cluster_weights;    // per-cluster gamma, sums to 1
  Vector weights;                         // global gamma when a single
                                          // consensus value exists
};

/// Predicts the consensus limit of x[k+1] = (I - eps*L) x[k] from the graph
/// connectivity class alone.
DirectedLimit predict_limit(const Graph& g, const Vector& x0);

/// Subtractively dithered uniform quantizer: values snap to the lattice
/// delta*Z; the error q(y + d) - (y + d) lies in [-delta/2, delta/2).
/// Returns (quantized, error).
std::pair<Vector, Vector> dithered_quantize(const Vector& y, double delta,
                                            Rng& rng);
double dithered_quantize_scalar(double y, double delta, double dither);

struct RobustChannelConfig {
  double p_link = 1.0;    // per-iteration link success probability
  int n_bits = 16;        // quantizer resolution (drives delta when delta < 0)
  double delta = 0.0;     // quantization step; 0 disables quantization
  double alpha0 = 1.0;    // step-size scale, alpha[k] = alpha0 / k
  bool decreasing_step = true;  // false: constant alpha0 (ideal-channel tests)
  std::uint64_t seed = 0;
  double agreement_band = -1.0;  // stop when spread <= band; <0 -> 4*delta
  int band_hold = 50;            // consecutive iterations inside the band
};

/// Consensus over lossy, quantized links with decreasing step size
/// alpha[k] = alpha0/k. Per-edge symmetric link failures, per-directed-link
/// dither. Deterministic per seed.
Trajectory run_robust_consensus(const ConsensusRun& run,
                                const RobustChannelConfig& ch);

/// Writes a trajectory as CSV (iter,node,component,value) plus a JSON
/// metadata sidecar next to it.
void export_trajectory_csv(const Trajectory& t, const std::string& csv_path,
                           const std::string& metadata_json);

}  // namespace simlab
