// Test-side reference implementations, kept independent of the library's
// computation paths on purpose.
#pragma once

#include <cmath>
#include <functional>

#include "simlab/estimation.hpp"
#include "simlab/graph.hpp"

namespace oracles {

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double tol, int depth = 0) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth > 48 || std::fabs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, 0.5 * tol, depth + 1) +
         simpson(f, m, b, 0.5 * tol, depth + 1);
}

// J1 from its integral representation (1/pi) int_0^pi cos(t - x sin t) dt.
inline double bessel_j1_integral(double x) {
  return simpson([x](double t) { return std::cos(t - x * std::sin(t)); },
                 0.0, M_PI, 1e-14) /
         M_PI;
}

// Centralized weighted lasso by proximal gradient with backtracking:
//   min 0.5 sum_i (x_i - A_i th)' C_i^-1 (x_i - A_i th) + mu ||th||_1.
inline simlab::Vector prox_lasso(const simlab::NodeLinearModel& model,
                                 double mu, double tol = 1e-12,
                                 int max_iters = 200000) {
  const int m = model.param_dim();
  simlab::Matrix info = simlab::Matrix::Zero(m, m);
  simlab::Vector rhs = simlab::Vector::Zero(m);
  for (int i = 0; i < model.nodes(); ++i) {
    const simlab::Matrix white =
        model.noise_cov[i].llt().solve(model.mixing[i]);
    info += model.mixing[i].transpose() * white;
    rhs += white.transpose() * model.measurement[i];
  }
  const auto smooth = [&](const simlab::Vector& th) {
    return 0.5 * th.dot(info * th) - rhs.dot(th);
  };
  const auto total = [&](const simlab::Vector& th) {
    return smooth(th) + mu * th.cwiseAbs().sum();
  };
  const auto shrink = [](const simlab::Vector& v, double t) {
    simlab::Vector out(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k)
      out(k) = v(k) > t ? v(k) - t : (v(k) < -t ? v(k) + t : 0.0);
    return out;
  };

  simlab::Vector th = simlab::Vector::Zero(m);
  double step = 1.0 / std::max(info.norm(), 1e-12);
  double obj = total(th);
  for (int it = 0; it < max_iters; ++it) {
    const simlab::Vector grad = info * th - rhs;
    simlab::Vector next;
    bool moved = false;
    double cand_obj = obj;
    for (int bt = 0; bt < 50; ++bt) {
      next = shrink(th - step * grad, step * mu);
      cand_obj = total(next);
      if (cand_obj <= obj + 1e-18) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    const double move = (next - th).norm();
    th = next;
    obj = cand_obj;
    step *= 1.2;
    if (move <= tol * std::max(1.0, th.norm())) break;
  }
  return th;
}

// Batch weighted-lasso objective pieces for the RLS anti-drift check.
struct BatchTerms {
  simlab::Matrix info;
  simlab::Vector rhs;
};

inline BatchTerms rls_batch_terms(
    const std::vector<simlab::RlsSnapshot>& stream, int upto, int node,
    double beta) {
  const int m = static_cast<int>(stream[0].mixing[0].cols());
  BatchTerms bt;
  bt.info = simlab::Matrix::Zero(m, m);
  bt.rhs = simlab::Vector::Zero(m);
  for (int l = 0; l <= upto; ++l) {
    const double w = std::pow(beta, upto - l);
    const simlab::Matrix white =
        stream[l].noise_cov[node].llt().solve(stream[l].mixing[node]);
    bt.info += w * stream[l].mixing[node].transpose() * white;
    bt.rhs += w * white.transpose() * stream[l].measurement[node];
  }
  return bt;
}

// Random connected undirected graph: RGG with retries.
inline simlab::Graph random_connected_graph(int n, double radius,
                                            std::uint64_t seed) {
  for (int t = 0; t < 200; ++t) {
    simlab::RggConfig cfg{n, radius, simlab::RggRegion::UnitSquare,
                          seed + static_cast<std::uint64_t>(t) * 7919};
    simlab::Graph g = simlab::sample_rgg(cfg);
    if (simlab::spectrum(g).lambda2 > 1e-9) return g;
  }
  throw std::runtime_error("random_connected_graph: no connected sample");
}

}  // namespace oracles
