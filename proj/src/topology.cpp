#include "simlab/topology.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "simlab/errors.hpp"
#include "simlab/special.hpp"

namespace simlab {

void DeterministicTopologyProblem::validate() const {
  const int n = size();
  if (distances.cols() != n || n < 2)
    throw Error("DeterministicTopologyProblem: bad distance matrix");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!(distances(i, j) > 0.0) ||
          distances(i, j) != distances(j, i))
        throw Error(
            "DeterministicTopologyProblem: distances must be symmetric "
            "positive");
    }
  if (eta < alpha)
    throw Error("DeterministicTopologyProblem: eta >= alpha required");
  if (!(conn_floor > 0.0))
    throw Error("DeterministicTopologyProblem: conn_floor must be > 0");
}

double energy_metric(const Matrix& a, const Matrix& p, double lambda2) {
  if (lambda2 <= 0.0)
    throw DisconnectedTopology("energy_metric: lambda2 <= 0");
  return a.cwiseProduct(p).sum() / lambda2;
}

double power_from_topology(double a, double distance,
                           const DeterministicTopologyProblem& prob) {
  if (a < 0.0 || a >= 1.0)
    throw Error("power_from_topology: a must lie in [0, 1)");
  const double k1 =
      prob.p_min * std::pow(distance / prob.fraunhofer, prob.eta);
  if (a == 0.0) return prob.p_min;
  return prob.p_min + k1 * std::pow(a / (1.0 - a), prob.eta / prob.alpha);
}

double binary_link_power(double distance,
                         const DeterministicTopologyProblem& prob) {
  return prob.p_min *
         (1.0 + std::pow(distance / prob.fraunhofer, prob.eta));
}

namespace {

struct PairIndex {
  std::vector<std::pair<int, int>> pairs;  // i < j
  explicit PairIndex(int n) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  int count() const { return static_cast<int>(pairs.size()); }
};

Matrix weights_from_vector(const PairIndex& idx, const Vector& a, int n) {
  Matrix w = Matrix::Zero(n, n);
  for (int e = 0; e < idx.count(); ++e) {
    const auto [i, j] = idx.pairs[e];
    w(i, j) = w(j, i) = a(e);
  }
  return w;
}

// lambda2 and the Fiedler vector of the weighted Laplacian.
std::pair<double, Vector> lambda2_of(const Matrix& w) {
  const int n = static_cast<int>(w.rows());
  Matrix lap = -w;
  for (int i = 0; i < n; ++i) lap(i, i) = w.row(i).sum();
  Eigen::SelfAdjointEigenSolver<Matrix> es(lap);
  return {es.eigenvalues()(1), es.eigenvectors().col(1)};
}

// phi(a) = sum over ordered pairs of q(a_ij) = 2 * sum over i<j.
double phi_of(const PairIndex& idx, const Vector& a,
              const DeterministicTopologyProblem& prob) {
  double total = 0.0;
  for (int e = 0; e < idx.count(); ++e) {
    const auto [i, j] = idx.pairs[e];
    total += 2.0 * power_from_topology(a(e), prob.distances(i, j), prob);
  }
  return total;
}

// Derivative of the ordered-pair power sum wrt one symmetric weight (the
// pair (i,j) contributes q(a) twice).
double phi_gradient_entry(double a, double distance,
                          const DeterministicTopologyProblem& prob) {
  const double k1 =
      prob.p_min * std::pow(distance / prob.fraunhofer, prob.eta);
  const double expo = prob.eta / prob.alpha;
  if (a <= 0.0) {
    // One-sided derivative at zero.
    return expo > 1.0 ? 0.0 : 2.0 * k1 * expo;
  }
  const double ratio = a / (1.0 - a);
  return 2.0 * k1 * expo * std::pow(ratio, expo - 1.0) /
         ((1.0 - a) * (1.0 - a));
}

struct InnerResult {
  Vector a;
  double phi;
  double lambda2;
};

// Projected subgradient minimization of phi(a) - mu*lambda2(a) with a
// quadratic penalty keeping lambda2 above the floor.
InnerResult minimize_parametric(const DeterministicTopologyProblem& prob,
                                const PairIndex& idx, double mu,
                                const Vector& start) {
  const int n = prob.size();
  const double a_hi = 1.0 - 1e-6;
  const double kappa = 200.0 * std::max(mu, prob.p_min * n);

  Vector a = start;
  const auto objective = [&](const Vector& v, double& phi, double& l2) {
    const Matrix w = weights_from_vector(idx, v, n);
    auto [lambda2, fiedler] = lambda2_of(w);
    (void)fiedler;
    phi = phi_of(idx, v, prob);
    l2 = lambda2;
    const double gap = std::max(0.0, prob.conn_floor - lambda2);
    return phi - mu * lambda2 + kappa * gap * gap;
  };

  double phi, l2;
  double best = objective(a, phi, l2);
  double step = 0.05;
  for (int it = 0; it < prob.max_inner; ++it) {
    const Matrix w = weights_from_vector(idx, a, n);
    auto [lambda2, fiedler] = lambda2_of(w);
    const double gap = std::max(0.0, prob.conn_floor - lambda2);

    Vector grad(idx.count());
    for (int e = 0; e < idx.count(); ++e) {
      const auto [i, j] = idx.pairs[e];
      const double dl = (fiedler(i) - fiedler(j)) * (fiedler(i) - fiedler(j));
      grad(e) = phi_gradient_entry(a(e), prob.distances(i, j), prob) -
                (mu + 2.0 * kappa * gap) * dl;
    }

    bool improved = false;
    for (int bt = 0; bt < 30; ++bt) {
      Vector trial =
          (a - step * grad).cwiseMax(0.0).cwiseMin(a_hi);
      double tphi, tl2;
      const double tobj = objective(trial, tphi, tl2);
      if (tobj < best - 1e-14) {
        a = trial;
        best = tobj;
        phi = tphi;
        l2 = tl2;
        improved = true;
        step *= 1.6;
        break;
      }
      step *= 0.5;
    }
    if (!improved && step < 1e-12) break;
  }
  return {a, phi, l2};
}

}  // namespace

EnergyDesign solve_min_energy_topology(const DeterministicTopologyProblem& p) {
  p.validate();
  const int n = p.size();
  const PairIndex idx(n);

  // Feasible start: a moderately connected complete profile.
  Vector a = Vector::Constant(idx.count(), 0.5);
  {
    double phi, l2;
    const Matrix w = weights_from_vector(idx, a, n);
    l2 = lambda2_of(w).first;
    phi = phi_of(idx, a, p);
    if (l2 < p.conn_floor)
      throw Infeasible(
          "solve_min_energy_topology: complete-graph start violates the "
          "connectivity floor",
          l2);
  }

  double mu = phi_of(idx, a, p) /
              lambda2_of(weights_from_vector(idx, a, n)).first;
  double f_mu = std::numeric_limits<double>::infinity();
  InnerResult inner{a, 0.0, 0.0};
  for (int outer = 0; outer < p.max_dinkelbach; ++outer) {
    inner = minimize_parametric(p, idx, mu, a);
    a = inner.a;
    if (inner.lambda2 <= 0.0)
      throw InnerSolverStalled(
          "solve_min_energy_topology: inner solve lost connectivity");
    f_mu = inner.phi - mu * inner.lambda2;
    const double ratio = inner.phi / inner.lambda2;
    if (std::fabs(f_mu) <= p.dinkelbach_tol) {
      mu = ratio;
      break;
    }
    mu = ratio;
  }

  EnergyDesign out;
  out.a_relaxed = weights_from_vector(idx, a, n);
  out.power = Matrix::Zero(n, n);
  for (int e = 0; e < idx.count(); ++e) {
    const auto [i, j] = idx.pairs[e];
    out.power(i, j) = out.power(j, i) =
        power_from_topology(a(e), p.distances(i, j), p);
  }
  out.lambda2 = inner.lambda2;
  out.mu_star = inner.phi / inner.lambda2;
  out.energy = out.mu_star;
  out.f_mu = inner.phi - out.mu_star * inner.lambda2;

  out.a_binary = Matrix::Zero(n, n);
  for (int e = 0; e < idx.count(); ++e) {
    const auto [i, j] = idx.pairs[e];
    if (a(e) >= p.a_threshold) out.a_binary(i, j) = out.a_binary(j, i) = 1.0;
  }
  const double l2_binary = lambda2_of(out.a_binary).first;
  out.thresholded_connected = l2_binary > 1e-9;
  if (out.thresholded_connected) {
    double power_sum = 0.0;
    for (int e = 0; e < idx.count(); ++e) {
      const auto [i, j] = idx.pairs[e];
      if (out.a_binary(i, j) > 0.0)
        power_sum += 2.0 * binary_link_power(p.distances(i, j), p);
    }
    out.thresholded_energy = power_sum / l2_binary;
  }
  return out;
}

std::pair<double, Matrix> brute_force_min_energy(
    const DeterministicTopologyProblem& prob) {
  prob.validate();
  const int n = prob.size();
  if (n > 6) throw Error("brute_force_min_energy: n must be <= 6");
  const PairIndex idx(n);
  const int bits = idx.count();
  double best = std::numeric_limits<double>::infinity();
  Matrix best_a = Matrix::Zero(n, n);
  for (long mask = 1; mask < (1L << bits); ++mask) {
    Matrix a = Matrix::Zero(n, n);
    double power_sum = 0.0;
    for (int e = 0; e < bits; ++e) {
      if (!(mask & (1L << e))) continue;
      const auto [i, j] = idx.pairs[e];
      a(i, j) = a(j, i) = 1.0;
      power_sum += 2.0 * binary_link_power(prob.distances(i, j), prob);
    }
    const double l2 = lambda2_of(a).first;
    if (l2 < prob.conn_floor) continue;
    const double energy = power_sum / l2;
    if (energy < best) {
      best = energy;
      best_a = a;
    }
  }
  if (!std::isfinite(best))
    throw Infeasible("brute_force_min_energy: no connected topology", 0.0);
  return {best, best_a};
}

RggEnergyCurve analytic_energy_rgg(int n, double p_min, double eta, double r0,
                                   int curve_points) {
  if (n < 2) throw Error("analytic_energy_rgg: n must be >= 2");
  const double nd = static_cast<double>(n);
  const auto energy = [&](double r) {
    const double denom = M_PI * nd * r * r - nd * r * bessel_j1(2.0 * M_PI * r);
    return nd * p_min * (1.0 + std::pow(r / r0, eta)) / denom;
  };

  const double lo = coverage_radius(static_cast<std::size_t>(n), 1.0);
  const double hi = 0.5;
  if (lo >= hi)
    throw Error("analytic_energy_rgg: empty radius domain");

  // Golden-section on the convex curve.
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = energy(x1), f2 = energy(x2);
  while (b - a > 1e-12) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = energy(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = energy(x2);
    }
  }

  RggEnergyCurve out;
  out.r_star = 0.5 * (a + b);
  out.e_star = energy(out.r_star);
  for (int i = 0; i < curve_points; ++i) {
    const double r = lo + (hi - lo) * i / (curve_points - 1);
    out.radii.push_back(r);
    out.energies.push_back(energy(r));
  }
  return out;
}

namespace {

void require_spd(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-8))
    throw NotSPD(std::string(what) + ": matrix not symmetric");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NotSPD(std::string(what) + ": matrix not positive definite");
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NotSPD("log_det_spd: not SPD");
  double total = 0.0;
  const Matrix l = llt.matrixL();
  for (int i = 0; i < m.rows(); ++i) total += std::log(l(i, i));
  return 2.0 * total;
}

}  // namespace

double burg_divergence(const Matrix& a, const Matrix& b) {
  require_spd(a, "burg_divergence(A)");
  require_spd(b, "burg_divergence(B)");
  const int n = static_cast<int>(a.rows());
  Eigen::LLT<Matrix> llt_b(b);
  const Matrix ab_inv = llt_b.solve(a).transpose();  // (B^-1 A)' = A B^-1
  const double trace = ab_inv.trace();
  const double logdet = log_det_spd(a) - log_det_spd(b);
  return 0.5 * (trace - n) - 0.5 * logdet;
}

double zhang_penalty(double a, double eps) {
  if (!(eps > 0.0)) throw Error("zhang_penalty: eps must be > 0");
  return std::min(std::fabs(a) / eps, 1.0);
}

double zhang_convex_part(double a, double eps) {
  if (!(eps > 0.0)) throw Error("zhang_convex_part: eps must be > 0");
  return std::fabs(a) / eps;
}

double zhang_concave_part(double a, double eps) {
  if (!(eps > 0.0)) throw Error("zhang_concave_part: eps must be > 0");
  return std::max(std::fabs(a) / eps - 1.0, 0.0);
}

void MatchingProblem::validate() const {
  const int n = size();
  if (covariance.cols() != n || distances.rows() != n ||
      distances.cols() != n)
    throw Error("MatchingProblem: dimension mismatch");
  if (rho < 0.0) throw Error("MatchingProblem: rho must be >= 0");
  if (!(zhang_eps > 0.0)) throw Error("MatchingProblem: zhang eps > 0");
}

namespace {

Matrix distance_costs(const MatchingProblem& prob) {
  const int n = prob.size();
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        d(i, j) = (1.0 + std::pow(prob.distances(i, j), prob.eta)) *
                  prob.p_min;
  return d;
}

Matrix spd_floor(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() *
         es.eigenvectors().transpose();
}

// Proximal gradient for f(A) = 0.5 tr(A C) - 0.5 logdet(A) + tr(Lin' A)
// + sum w_ij |a_ij| over the SPD cone (eigenvalue floor). Equivalent to a
// projected gradient on the positive/negative split of A.
struct ProxSolveResult {
  Matrix a;
  double objective;
  double stationarity;
};

ProxSolveResult prox_solve(const Matrix& c, const Matrix& lin,
                           const Matrix& l1_weights, const Matrix& start,
                           double floor, int max_iters) {
  const auto smooth = [&](const Matrix& a) {
    return 0.5 * (a.cwiseProduct(c).sum()) - 0.5 * log_det_spd(a) +
           lin.cwiseProduct(a).sum();
  };
  const auto total = [&](const Matrix& a) {
    return smooth(a) + l1_weights.cwiseProduct(a.cwiseAbs()).sum();
  };

  Matrix a = spd_floor(start, floor);
  double obj = total(a);
  double step = 1.0;
  double stationarity = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    const Matrix a_inv = a.llt().solve(Matrix::Identity(a.rows(), a.cols()));
    const Matrix grad = 0.5 * c - 0.5 * a_inv + lin;

    Matrix next;
    double next_obj = obj;
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      Matrix candidate = a - step * grad;
      // Entrywise soft threshold with per-entry weight, then SPD floor.
      for (int r = 0; r < candidate.rows(); ++r)
        for (int q = 0; q < candidate.cols(); ++q) {
          const double th = step * l1_weights(r, q);
          const double v = candidate(r, q);
          candidate(r, q) = v > th ? v - th : (v < -th ? v + th : 0.0);
        }
      candidate = 0.5 * (candidate + candidate.transpose());
      Eigen::LLT<Matrix> llt(candidate);
      if (llt.info() != Eigen::Success)
        candidate = spd_floor(candidate, floor);
      const double cand_obj = total(candidate);
      if (cand_obj < obj - 1e-15) {
        next = candidate;
        next_obj = cand_obj;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      // No descent direction survives 40 halvings: numerically stationary.
      stationarity = 1e-9 * (1.0 + a.norm());
      break;
    }
    stationarity = (next - a).norm() / std::max(step, 1e-300);
    const double rel = (obj - next_obj) / std::max(std::fabs(obj), 1e-12);
    a = next;
    obj = next_obj;
    step *= 1.4;
    if (rel < 1e-13 && stationarity < 1e-8 * (1.0 + a.norm())) break;
  }
  return {a, obj, stationarity};
}

std::vector<std::pair<int, int>> thresholded_links(const Matrix& a,
                                                   double a_th) {
  std::vector<std::pair<int, int>> links;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.cols(); ++j)
      if (std::fabs(a(i, j)) > a_th) links.emplace_back(i, j);
  return links;
}

}  // namespace

PrecisionEstimate solve_ses(const MatchingProblem& prob) {
  prob.validate();
  require_spd(prob.covariance, "solve_ses");
  const int n = prob.size();
  const Matrix d = distance_costs(prob);
  const Matrix start = Matrix::Identity(n, n);
  // D_B(A, C^-1) = 0.5 tr(A C) - 0.5 logdet(A C) - n/2; the constant part
  // does not move the minimizer.
  const auto result = prox_solve(prob.covariance, Matrix::Zero(n, n),
                                 prob.rho * d, start, prob.spd_floor,
                                 prob.max_inner);
  if (!(result.stationarity < 1e-4 * (1.0 + result.a.norm())))
    throw SubproblemStalled("solve_ses: projected gradient stalled");

  PrecisionEstimate out;
  out.a_opt = result.a;
  out.objective = result.objective;
  out.links = thresholded_links(result.a, prob.a_threshold);
  return out;
}

PrecisionEstimate solve_smp(const MatchingProblem& prob) {
  prob.validate();
  require_spd(prob.covariance, "solve_smp");
  const int n = prob.size();
  const Matrix d = distance_costs(prob);
  const double eps = prob.zhang_eps;

  const auto zhang_objective = [&](const Matrix& a) {
    double penalty = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) penalty += d(i, j) * zhang_penalty(a(i, j), eps);
    // Burg divergence against B = C^-1 written through C.
    const double burg = 0.5 * a.cwiseProduct(prob.covariance).sum() -
                        0.5 * log_det_spd(a) -
                        0.5 * log_det_spd(prob.covariance) -
                        0.5 * static_cast<double>(n);
    return burg + prob.rho * penalty;
  };

  Matrix a = Matrix::Identity(n, n);
  PrecisionEstimate out;
  double prev = zhang_objective(a);
  out.dca_objectives.push_back(prev);

  for (int it = 0; it < prob.max_outer; ++it) {
    // Linearize the concave part: subgradient of h at the current point.
    Matrix lin = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        if (std::fabs(a(i, j)) > eps)
          lin(i, j) = -prob.rho * d(i, j) *
                      (a(i, j) > 0.0 ? 1.0 : -1.0) / eps;
      }
    const auto sub = prox_solve(prob.covariance, lin,
                                (prob.rho / eps) * d, a, prob.spd_floor,
                                prob.max_inner);
    const double obj = zhang_objective(sub.a);
    if (obj > prev + 1e-10) break;  // keep the monotone certificate honest
    a = sub.a;
    out.dca_objectives.push_back(obj);
    const bool settled = prev - obj < 1e-12 * std::max(1.0, std::fabs(prev));
    prev = obj;
    if (settled) break;
  }

  out.a_opt = a;
  out.objective = prev;
  out.links = thresholded_links(a, prob.a_threshold);
  return out;
}

double incorrect_link_fraction(const Matrix& a_true, const Matrix& a_opt,
                               double a_th) {
  if (a_true.rows() != a_opt.rows() || a_true.cols() != a_opt.cols())
    throw Error("incorrect_link_fraction: size mismatch");
  const int n = static_cast<int>(a_true.rows());
  int mismatches = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool lt = std::fabs(a_true(i, j)) > a_th;
      const bool lo = std::fabs(a_opt(i, j)) > a_th;
      if (lt != lo) ++mismatches;
    }
  return static_cast<double>(mismatches) /
         (static_cast<double>(n) * (n - 1) / 2.0);
}

CovarianceEstimate estimate_covariance(const Matrix& samples) {
  const int k = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (k < 1) throw Error("estimate_covariance: need at least one sample");
  CovarianceEstimate out;
  out.c = samples.transpose() * samples / static_cast<double>(k);
  out.c = 0.5 * (out.c + out.c.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(out.c);
  const double min_ev = es.eigenvalues().minCoeff();
  if (min_ev < 1e-8) {
    out.regularization = 1e-8 - std::min(min_ev, 0.0);
    out.c.diagonal().array() += out.regularization;
  }
  return out;
}

}  // namespace simlab
