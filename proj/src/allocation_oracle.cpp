#include "simlab/allocation_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "simlab/errors.hpp"

namespace simlab {

namespace {

// Derivative of 1/(sigma2 + A^2/(3(1+pa))) with respect to p.
double coverage_term_grad(double p, double a, double sigma2, double range2) {
  const double q = range2 / (3.0 * (1.0 + p * a));
  const double denom = sigma2 + q;
  const double dq_dp = -range2 * a / (3.0 * (1.0 + p * a) * (1.0 + p * a));
  return -dq_dp / (denom * denom);
}

}  // namespace

Vector estimation_allocation_oracle(const ChannelSet& ch,
                                    double epsilon_target, int outer_iters,
                                    int inner_iters) {
  const int n = ch.size();
  const double range2 = ch.range * ch.range;
  const double target = 1.0 / epsilon_target;

  const auto coverage = [&](const Vector& p) {
    double total = 0.0;
    for (int k = 0; k < n; ++k)
      total += 1.0 / (ch.sigma2(k) + range2 / (3.0 * (1.0 + p(k) * ch.gain(k))));
    return total;
  };

  Vector p = Vector::Constant(n, 1.0);
  double nu = 1.0;       // multiplier for target - coverage(p) <= 0
  double penalty = 4.0;  // augmented-Lagrangian weight

  for (int outer = 0; outer < outer_iters; ++outer) {
    // Inner: projected gradient on the AL function
    //   sum p + (penalty/2) [max(0, nu/penalty + target - coverage)]^2
    //   - nu^2/(2 penalty).
    double step = 0.1;
    const auto al_value = [&](const Vector& v) {
      const double viol =
          std::max(0.0, nu / penalty + target - coverage(v));
      return v.sum() + 0.5 * penalty * viol * viol;
    };
    double current = al_value(p);
    for (int it = 0; it < inner_iters; ++it) {
      const double slack = nu / penalty + target - coverage(p);
      Vector grad = Vector::Ones(n);
      if (slack > 0.0)
        for (int k = 0; k < n; ++k)
          grad(k) -= penalty * slack *
                     coverage_term_grad(p(k), ch.gain(k), ch.sigma2(k),
                                          range2);
      bool moved = false;
      for (int bt = 0; bt < 30; ++bt) {
        Vector trial = (p - step * grad).cwiseMax(0.0);
        const double value = al_value(trial);
        if (value < current - 1e-15) {
          p = trial;
          current = value;
          moved = true;
          step *= 1.5;
          break;
        }
        step *= 0.5;
      }
      if (!moved && step < 1e-14) break;
    }
    nu = std::max(0.0, nu + penalty * (target - coverage(p)));
    penalty = std::min(penalty * 1.8, 1e8);
  }
  return p;
}

Vector detection_allocation_oracle(const ChannelSet& ch, const Vector& signal,
                                   double total_power, int iters) {
  const int n = ch.size();
  const double range2 = ch.range * ch.range;

  // Projection onto {p >= 0, sum p <= P_T}: clip, then shift the active
  // coordinates by the water level that restores the budget.
  const auto project = [&](Vector v) {
    v = v.cwiseMax(0.0);
    if (v.sum() <= total_power) return v;
    // bisection on the shift
    double lo = 0.0, hi = v.maxCoeff();
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double s = (v.array() - mid).cwiseMax(0.0).sum();
      if (s > total_power)
        lo = mid;
      else
        hi = mid;
    }
    return Vector((v.array() - hi).cwiseMax(0.0));
  };

  const auto deflection = [&](const Vector& p) {
    return detection_deflection(ch, signal, p);
  };

  Vector p = project(Vector::Constant(n, total_power / n));
  double current = deflection(p);
  double step = total_power / n;
  for (int it = 0; it < iters; ++it) {
    // Negated gradient of the deflection, so the descent-style update below
    // ascends the objective.
    Vector grad(n);
    for (int k = 0; k < n; ++k)
      grad(k) = -signal(k) * signal(k) *
                coverage_term_grad(p(k), ch.gain(k), ch.sigma2(k), range2);
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      Vector trial = project(p - step * grad);
      const double value = deflection(trial);
      if (value > current + 1e-15) {
        p = trial;
        current = value;
        moved = true;
        step *= 1.4;
        break;
      }
      step *= 0.5;
    }
    if (!moved && step < 1e-15 * total_power) break;
  }
  return p;
}

}  // namespace simlab
