#pragma once

#include <Eigen/Sparse>
#include <cstdint>
#include <vector>

#include "simlab/consensus.hpp"
#include "simlab/graph.hpp"

namespace simlab {

/// Orthonormal sampled basis of the smooth-field subspace.
struct SignalBasis {
  Matrix u;                                  // N x r, U'U = I
  std::vector<std::pair<int, int>> pairs;    // 2-D Fourier index pairs
  Eigen::Matrix<double, Eigen::Dynamic, 2> positions;

  int dim() const { return static_cast<int>(u.cols()); }
};

/// Low-frequency 2-D Fourier basis sampled at the node positions:
/// the constant plus cos/sin(2*pi*(n x + m y)) for the first `max_order`
/// index pairs ordered by |frequency|^2. Columns are orthonormalized over
/// the sample points; throws RankDeficientBasis when the samples cannot
/// support the requested order.
SignalBasis fourier_basis_2d(
    const Eigen::Matrix<double, Eigen::Dynamic, 2>& positions, int max_order);

/// Canonical frequency ordering used by fourier_basis_2d.
std::vector<std::pair<int, int>> fourier_pairs(int max_order);

/// Sparse weights whose iteration converges to the orthogonal projection
/// onto the basis subspace.
struct ProjectionNetwork {
  Matrix l_proj;                        // generalized Laplacian, L U = 0
  Eigen::SparseMatrix<double> w;        // I - epsilon * L, iteration form
  double epsilon = 0.0;
  Matrix basis;                         // copy of U
  double rho_gap = 1.0;                 // spectral radius of W - U U'
  double c1_residual = 0.0;             // ||W P - P||
  double c2_residual = 0.0;             // ||P W - P||
  int rank = 0;                         // verified rank of L (= N - r)
};

/// Builds the projection weights for an arbitrary undirected graph: a
/// symmetric generalized Laplacian supported on closed neighborhoods with
/// null space spanned by the basis (every row solves the local kernel
/// equation), found as the least-change perturbation of the plain graph
/// Laplacian. The step is scanned as epsilon = c / rho(L), accepting the
/// largest c that keeps rho(W - UU') < 1.
ProjectionNetwork build_projection_weights(const Graph& g,
                                           const SignalBasis& basis);

/// Fast path for a uniform torus grid of side `grid_side`: one symmetric
/// stencil shared by every node (neighbors within `radius_steps` grid
/// steps), fitted so its transform vanishes exactly on the basis
/// frequencies and stays positive elsewhere.
ProjectionNetwork build_projection_weights_grid(int grid_side,
                                                double radius_steps,
                                                int max_order);

/// Node positions of the uniform grid used by the fast path.
Eigen::Matrix<double, Eigen::Dynamic, 2> grid_positions(int grid_side);

/// Iterates z[k+1] = W z[k] until the relative change drops below tol.
Trajectory run_projection(const ProjectionNetwork& net, const Vector& g0,
                          int max_iters = 200000, double tol = 1e-12);

/// Smooth field plus multiplicative fading scenario.
struct FieldScenario {
  std::vector<Eigen::Vector2d> sources;  // in [0,1]^2 (unit coordinates)
  std::vector<double> powers;
  double spread = 0.2;        // sigma of the polynomial attenuation
  double side = 10.0;         // physical side length L
  double fading_sigma = 0.7;  // lognormal fading strength; 0 disables
  int grid_side = 50;
  std::uint64_t seed = 0;
};

/// Clean field values at the grid nodes.
Vector field_values(const FieldScenario& sc);

/// Multiplicative lognormal fading per node (all ones when disabled).
Vector field_fading(const FieldScenario& sc);

struct DenoiseResult {
  Vector clean;
  Vector measured;
  Vector denoised;
  double rmse_measured = 0.0;
  double rmse_denoised = 0.0;
  double modeling_rmse = 0.0;  // projection residual of the clean field
  int clamped = 0;             // measurements floored before the log
  int iterations = 0;
};

/// Homomorphic pipeline: log -> distributed projection -> exp.
DenoiseResult denoise_field(const FieldScenario& sc,
                            const ProjectionNetwork& net);

}  // namespace simlab
