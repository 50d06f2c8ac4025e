#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "simlab/graph.hpp"

namespace simlab {

/// Energy-minimal topology design over known pairwise distances.
struct DeterministicTopologyProblem {
  Matrix distances;       // symmetric, positive off-diagonal
  double eta = 4.0;       // path-loss exponent
  double alpha = 2.0;     // link-profile sharpness; requires eta >= alpha
  double fraunhofer = 0.1;
  double p_min = 1.0;     // receiver floor
  double conn_floor = 0.1;  // lambda2 lower bound
  double dinkelbach_tol = 1e-8;
  double a_threshold = 0.09;
  int max_dinkelbach = 60;
  int max_inner = 4000;

  void validate() const;
  int size() const { return static_cast<int>(distances.rows()); }
};

struct EnergyDesign {
  Matrix a_relaxed;       // in [0, 1)
  Matrix a_binary;        // thresholded adjacency (0/1)
  Matrix power;           // q(a_ij) per ordered pair
  double lambda2 = 0.0;   // of the relaxed design
  double energy = 0.0;    // phi(a) / lambda2 at the relaxed solution
  double mu_star = 0.0;   // Dinkelbach parameter at termination
  double f_mu = 0.0;      // phi - mu* lambda2 at the returned design
  bool thresholded_connected = false;
  double thresholded_energy = 0.0;  // combinatorial energy of a_binary
};

/// E = K * sum a_ij p_ij / lambda2 with K = 1. Throws DisconnectedTopology
/// when lambda2 <= 0.
double energy_metric(const Matrix& a, const Matrix& p, double lambda2);

/// Link power profile q(a) = p_min + k1 (a/(1-a))^(eta/alpha) with
/// k1 = p_min (r/r0)^eta.
double power_from_topology(double a, double distance,
                           const DeterministicTopologyProblem& prob);

/// Power needed to close a binary link over the given distance.
double binary_link_power(double distance,
                         const DeterministicTopologyProblem& prob);

/// Dinkelbach outer loop around a projected-gradient inner solver (Fiedler
/// outer-product subgradient for lambda2).
EnergyDesign solve_min_energy_topology(const DeterministicTopologyProblem& p);

/// Exhaustive optimum of the combinatorial problem for n <= 6 (test oracle).
std::pair<double, Matrix> brute_force_min_energy(
    const DeterministicTopologyProblem& prob);

struct RggEnergyCurve {
  double r_star = 0.0;
  double e_star = 0.0;
  std::vector<double> radii;
  std::vector<double> energies;
};

/// Analytic energy over a torus RGG:
/// E(r) = N p_min (1 + (r/r0)^eta) / (pi N r^2 - N r J1(2 pi r)),
/// minimized by golden-section search over [r0(N), 0.5].
RggEnergyCurve analytic_energy_rgg(int n, double p_min, double eta, double r0,
                                   int curve_points = 200);

/// Burg matrix divergence 0.5 tr(A B^-1 - I) - 0.5 log det(A B^-1).
double burg_divergence(const Matrix& a, const Matrix& b);

/// Zhang penalty z(a) = min(|a|/eps, 1) and its convex-concave split
/// z = g_v - h with g_v = |a|/eps, h = max(|a|/eps - 1, 0).
double zhang_penalty(double a, double eps);
double zhang_convex_part(double a, double eps);
double zhang_concave_part(double a, double eps);

enum class MatchingStrategy { SMP, SES };

struct MatchingProblem {
  Matrix covariance;      // C (known) or sample estimate
  Matrix distances;       // r_ij
  double eta = 2.0;
  double p_min = 1.0;
  double rho = 0.0;       // penalty weight
  double zhang_eps = 0.1;
  MatchingStrategy strategy = MatchingStrategy::SES;
  double a_threshold = 1e-4;
  double spd_floor = 1e-8;
  int max_outer = 30;     // DCA iterations (SMP)
  int max_inner = 20000;

  void validate() const;
  int size() const { return static_cast<int>(covariance.rows()); }
};

struct PrecisionEstimate {
  Matrix a_opt;
  std::vector<std::pair<int, int>> links;  // |a_ij| > threshold, i < j
  double objective = 0.0;
  std::vector<double> dca_objectives;      // per DCA iteration (SMP)
};

/// Sparsity-with-minimum-power estimate: DC programming on the Zhang
/// penalty, every convex subproblem solved by projected gradient over the
/// SPD cone (eigenvalue floor spd_floor).
PrecisionEstimate solve_smp(const MatchingProblem& prob);

/// Sparse estimation strategy: convex l1-weighted program solved on the
/// positive/negative split by projected gradient.
PrecisionEstimate solve_ses(const MatchingProblem& prob);

/// Fraction of links in the symmetric difference between the supports of
/// two precision matrices, normalized by N(N-1)/2.
double incorrect_link_fraction(const Matrix& a_true, const Matrix& a_opt,
                               double a_th);

/// Sample second-moment matrix (1/K) sum x x' (no mean subtraction),
/// regularized to SPD by adding delta*I when needed.
struct CovarianceEstimate {
  Matrix c;
  double regularization = 0.0;
};
CovarianceEstimate estimate_covariance(const Matrix& samples);

}  // namespace simlab
