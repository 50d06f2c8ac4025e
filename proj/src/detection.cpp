#include "simlab/detection.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "simlab/consensus.hpp"
#include "simlab/errors.hpp"
#include "simlab/special.hpp"

namespace simlab {

void DeterministicSignalModel::validate() const {
  const auto n = signal.size();
  if (noise_cov.rows() != n || noise_cov.cols() != n || quant_var.size() != n)
    throw Error("DeterministicSignalModel: dimension mismatch");
  if (!noise_cov.isApprox(noise_cov.transpose(), 1e-10))
    throw Error("DeterministicSignalModel: noise covariance not symmetric");
  if ((quant_var.array() < 0.0).any())
    throw Error("DeterministicSignalModel: negative quantization variance");
  Eigen::LLT<Matrix> llt(noise_cov);
  if (llt.info() != Eigen::Success)
    throw SingularCovariance(
        "DeterministicSignalModel: noise covariance not positive definite");
}

Matrix DeterministicSignalModel::total_cov() const {
  Matrix c = noise_cov;
  c.diagonal() += quant_var;
  return c;
}

double matched_filter_statistic(const DeterministicSignalModel& model,
                                const Vector& x) {
  model.validate();
  if (x.size() != model.signal.size())
    throw Error("matched_filter_statistic: observation size mismatch");
  Eigen::LLT<Matrix> llt(model.total_cov());
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("matched_filter_statistic: covariance singular");
  return model.signal.dot(llt.solve(x));
}

double detection_probability(const DeterministicSignalModel& model,
                             double pfa) {
  if (!(pfa > 0.0 && pfa < 1.0))
    throw Error("detection_probability: pfa must lie in (0, 1)");
  model.validate();
  Eigen::LLT<Matrix> llt(model.total_cov());
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("detection_probability: covariance singular");
  const double deflection = model.signal.dot(llt.solve(model.signal));
  return q_function(q_inverse(pfa) - std::sqrt(deflection));
}

void LocalDecisionProfile::validate() const {
  if (p_miss.size() != p_false.size() ||
      static_cast<int>(decisions.size()) != p_miss.size())
    throw Error("LocalDecisionProfile: size mismatch");
  for (Eigen::Index i = 0; i < p_miss.size(); ++i) {
    if (!(p_miss(i) > 0.0 && p_miss(i) < 1.0) ||
        !(p_false(i) > 0.0 && p_false(i) < 1.0))
      throw Error("LocalDecisionProfile: probabilities must be inside (0,1)");
    if (decisions[i] != 0 && decisions[i] != 1)
      throw Error("LocalDecisionProfile: decisions must be 0/1");
  }
}

FusionResult chair_varshney_fuse(const LocalDecisionProfile& profile,
                                 double eta) {
  profile.validate();
  if (!(eta > 0.0)) throw Error("chair_varshney_fuse: eta must be > 0");
  const int n = profile.size();
  FusionResult out;
  out.weights = Vector(n);
  out.statistic = 0.0;
  double threshold = std::log(eta);
  for (int i = 0; i < n; ++i) {
    const double pm = profile.p_miss(i);
    const double pf = profile.p_false(i);
    out.weights(i) = std::log((1.0 - pm) * (1.0 - pf) / (pm * pf));
    out.statistic += out.weights(i) * profile.decisions[i];
    threshold += std::log((1.0 - pf) / pm);
  }
  out.threshold = threshold;
  out.decide_h1 = out.statistic >= out.threshold;  // ties go to H1
  return out;
}

namespace {

// Adaptive Gauss-Kronrod (G7/K15).
const double kKronrodNodes[8] = {
    0.000000000000000, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813};
const double kKronrodWeights[8] = {
    0.209482141084728, 0.204432940075298, 0.190350578064785,
    0.169004726639267, 0.140653259715525, 0.104790010322250,
    0.063092092629979, 0.022935322010529};
const double kGaussWeights[4] = {0.417959183673469, 0.381830050505119,
                                 0.279705391489277, 0.129484966168870};

template <class F>
void gk15(const F& f, double a, double b, double& value, double& error) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fk[15];
  fk[7] = f(mid);
  for (int i = 1; i <= 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    fk[7 - i] = f(mid - dx);
    fk[7 + i] = f(mid + dx);
  }
  double kronrod = kKronrodWeights[0] * fk[7];
  for (int i = 1; i <= 7; ++i)
    kronrod += kKronrodWeights[i] * (fk[7 - i] + fk[7 + i]);
  double gauss = kGaussWeights[0] * fk[7];
  for (int i = 1; i <= 3; ++i) {
    const int offset = 2 * i;
    gauss += kGaussWeights[i] * (fk[7 - offset] + fk[7 + offset]);
  }
  value = kronrod * half;
  error = std::fabs((kronrod - gauss) * half);
}

template <class F>
double integrate_adaptive(const F& f, double a, double b, double tol,
                          int depth = 0) {
  if (a >= b) return 0.0;
  double value, error;
  gk15(f, a, b, value, error);
  if (error <= tol || depth >= 40) {
    if (error > tol)
      throw QuadratureFailure("adaptive quadrature: tolerance not reached");
    return value;
  }
  const double mid = 0.5 * (a + b);
  return integrate_adaptive(f, a, mid, 0.5 * tol, depth + 1) +
         integrate_adaptive(f, mid, b, 0.5 * tol, depth + 1);
}

double gaussian_pdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

// Conditional probability P(x < tau) for x ~ N(mean, sigma^2), evaluated by
// quadrature over the ten-sigma truncated domain and normalized by the
// quadrature of the full mass (so a unit integrand stays exactly 1).
double below_fraction(double tau, double mean, double sigma) {
  const double lo = mean - 10.0 * sigma;
  const double hi = mean + 10.0 * sigma;
  const auto pdf = [&](double x) { return gaussian_pdf(x, mean, sigma); };
  const double total = integrate_adaptive(pdf, lo, hi, 1e-13);
  if (tau <= lo) return 0.0;
  if (tau >= hi) return 1.0;
  return integrate_adaptive(pdf, lo, tau, 1e-13) / total;
}

// x-domain threshold equivalent to the LR test Lambda(x) >= t for
// x ~ N(0, s^2) vs N(m, s^2): Lambda monotone in x when m > 0.
double lr_threshold_to_x(double t, double mean, double sigma) {
  if (t <= 0.0) return -std::numeric_limits<double>::infinity();
  return sigma * sigma * std::log(t) / mean + 0.5 * mean;
}

}  // namespace

double tenney_sandell_threshold(const CostTable& c, double p0, double p1,
                                const TwoSensorGaussianModel& model,
                                double t2) {
  if (!(p0 > 0.0 && p1 > 0.0))
    throw Error("tenney_sandell_threshold: priors must be positive");
  const double tau2 = lr_threshold_to_x(t2, model.mean2, model.sigma);
  const double f0 = below_fraction(tau2, 0.0, model.sigma);
  const double f1 = below_fraction(tau2, model.mean2, model.sigma);

  const double num_const = c[1][1][0] - c[0][1][0];
  const double num_below = c[1][0][0] - c[0][0][0] + c[0][1][0] - c[1][1][0];
  const double den_const = c[0][1][1] - c[1][1][1];
  const double den_below = c[0][0][1] - c[1][0][1] + c[1][1][1] - c[0][1][1];

  const double denominator = p1 * (den_const + den_below * f1);
  if (!(denominator > 0.0))
    throw Error("tenney_sandell_threshold: degenerate cost structure");
  return p0 * (num_const + num_below * f0) / denominator;
}

double tenney_sandell_threshold_peer(const CostTable& c, double p0, double p1,
                                     const TwoSensorGaussianModel& model,
                                     double t1) {
  // Same expression with the detector roles of the cost indices exchanged.
  CostTable swapped;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) swapped[i][j][k] = c[j][i][k];
  TwoSensorGaussianModel mirrored = model;
  std::swap(mirrored.mean1, mirrored.mean2);
  return tenney_sandell_threshold(swapped, p0, p1, mirrored, t1);
}

std::pair<double, double> fixed_point_thresholds(
    const CostTable& costs, double p0, double p1,
    const TwoSensorGaussianModel& model, int max_iters) {
  double t1 = p0 / p1;
  double t2 = p0 / p1;
  for (int it = 0; it < max_iters; ++it) {
    const double t1_next = tenney_sandell_threshold(costs, p0, p1, model, t2);
    const double t2_next =
        tenney_sandell_threshold_peer(costs, p0, p1, model, t1_next);
    const double move = std::max(std::fabs(t1_next - t1),
                                 std::fabs(t2_next - t2));
    t1 = t1_next;
    t2 = t2_next;
    if (move <= 1e-8) return {t1, t2};
  }
  throw NoFixedPoint("fixed_point_thresholds: no fixed point after " +
                     std::to_string(max_iters) + " iterations");
}

Vector consensus_log_lr(const Vector& local_log_lrs, const Graph& g,
                        double tol) {
  if (g.directed())
    throw Error("consensus_log_lr: undirected graph expected");
  ConsensusRun run{g, local_log_lrs,
                   0.99 / std::max(g.max_in_degree(), 1e-12), 200000, tol};
  return run_consensus(run).limit.col(0);
}

Vector fusion_initial_states(const LocalDecisionProfile& profile) {
  profile.validate();
  Vector init(profile.size());
  for (int i = 0; i < profile.size(); ++i) {
    const double pm = profile.p_miss(i);
    const double pf = profile.p_false(i);
    init(i) = std::log((1.0 - pm) * (1.0 - pf) / (pm * pf)) *
              profile.decisions[i];
  }
  return init;
}

}  // namespace simlab
