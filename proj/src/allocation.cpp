#include "simlab/allocation.hpp"

#include <cmath>

#include "simlab/errors.hpp"
#include "simlab/special.hpp"

namespace simlab {

ChannelSet::ChannelSet(Vector gain_, Vector sigma2_, double range_)
    : gain(std::move(gain_)), sigma2(std::move(sigma2_)), range(range_) {
  if (gain.size() != sigma2.size() || gain.size() == 0)
    throw Error("ChannelSet: per-sensor vectors must match and be nonempty");
  if (!(range > 0.0)) throw Error("ChannelSet: dynamic range must be > 0");
  for (Eigen::Index k = 0; k < gain.size(); ++k) {
    if (!(gain(k) > 0.0) || !std::isfinite(gain(k)))
      throw Error("ChannelSet: channel factors must be positive and finite");
    if (!(sigma2(k) > 0.0) || !std::isfinite(sigma2(k)))
      throw Error("ChannelSet: noise variances must be positive and finite");
  }
}

double bits_from_power(double p, double a) {
  if (p < 0.0 || !(a > 0.0))
    throw Error("bits_from_power: need p >= 0 and a > 0");
  return 0.5 * std::log2(1.0 + p * a);
}

double quantization_variance(double bits, double range) {
  return range * range / (3.0 * std::exp2(2.0 * bits));
}

std::pair<double, double> blue_fused_estimate(const Vector& messages,
                                              const Vector& variances) {
  if (messages.size() != variances.size() || messages.size() == 0)
    throw Error("blue_fused_estimate: size mismatch");
  double weight_sum = 0.0, value = 0.0;
  for (Eigen::Index k = 0; k < messages.size(); ++k) {
    if (!(variances(k) > 0.0))
      throw Error("blue_fused_estimate: variances must be positive");
    const double w = 1.0 / variances(k);
    weight_sum += w;
    value += w * messages(k);
  }
  return {value / weight_sum, 1.0 / weight_sum};
}

double estimation_constraint_gap(const ChannelSet& ch, const Vector& power,
                                 double epsilon_target) {
  const double a2 = ch.range * ch.range;
  double lhs = 0.0;
  for (int k = 0; k < ch.size(); ++k) {
    const double quant = a2 / (3.0 * (1.0 + power(k) * ch.gain(k)));
    lhs += 1.0 / (ch.sigma2(k) + quant);
  }
  return lhs - 1.0 / epsilon_target;
}

namespace {

// KKT power profile for the estimation problem at multiplier lambda.
Vector estimation_powers(const ChannelSet& ch, double lambda) {
  const double a2 = ch.range * ch.range;
  Vector p(ch.size());
  for (int k = 0; k < ch.size(); ++k) {
    const double s2 = ch.sigma2(k);
    const double ak = ch.gain(k);
    const double value = std::sqrt(lambda * a2 / (3.0 * ak)) / s2 -
                         1.0 / ak - a2 / (3.0 * ak * s2);
    p(k) = std::max(0.0, value);
  }
  return p;
}

// KKT power profile for the detection problem at multiplier lambda.
Vector detection_powers(const ChannelSet& ch, const Vector& s, double lambda) {
  const double a2 = ch.range * ch.range;
  Vector p(ch.size());
  for (int k = 0; k < ch.size(); ++k) {
    const double sn2 = ch.sigma2(k);
    const double ak = ch.gain(k);
    const double value =
        std::sqrt(s(k) * s(k) * a2 / (3.0 * ak * sn2 * sn2) / lambda) -
        a2 / (3.0 * ak * sn2) - 1.0 / ak;
    p(k) = std::max(0.0, value);
  }
  return p;
}

}  // namespace

EstimationAllocation solve_estimation_allocation(const ChannelSet& ch,
                                                 double epsilon_target) {
  if (!(epsilon_target > 0.0))
    throw Error("solve_estimation_allocation: epsilon must be > 0");
  const double budget = ch.sigma2.cwiseInverse().sum();
  const double epsilon_min = 1.0 / budget;
  if (budget <= 1.0 / epsilon_target)
    throw Infeasible(
        "solve_estimation_allocation: target below the unquantized bound",
        epsilon_min);

  // The constraint gap is monotone increasing in lambda; bracket then bisect.
  double lo = 1e-12;
  double hi = 1.0;
  while (estimation_constraint_gap(ch, estimation_powers(ch, hi),
                                   epsilon_target) < 0.0) {
    hi *= 4.0;
    if (hi > 1e60)
      throw Error("solve_estimation_allocation: multiplier bracket failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (estimation_constraint_gap(ch, estimation_powers(ch, mid),
                                  epsilon_target) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }

  EstimationAllocation out;
  out.lambda = hi;
  out.power = estimation_powers(ch, hi);
  out.bits = Vector(ch.size());
  double inv_sum = 0.0;
  for (int k = 0; k < ch.size(); ++k) {
    out.bits(k) = bits_from_power(out.power(k), ch.gain(k));
    inv_sum += 1.0 / (ch.sigma2(k) +
                      quantization_variance(out.bits(k), ch.range));
  }
  out.mse_bound = 1.0 / inv_sum;
  out.total_power = out.power.sum();
  return out;
}

double detection_deflection(const ChannelSet& ch, const Vector& signal,
                            const Vector& power) {
  const double a2 = ch.range * ch.range;
  double total = 0.0;
  for (int k = 0; k < ch.size(); ++k) {
    const double quant = a2 / (3.0 * (1.0 + power(k) * ch.gain(k)));
    total += signal(k) * signal(k) / (ch.sigma2(k) + quant);
  }
  return total;
}

DetectionAllocation solve_detection_allocation(const ChannelSet& ch,
                                               const Vector& signal,
                                               double total_power,
                                               double pfa) {
  if (signal.size() != ch.gain.size())
    throw Error("solve_detection_allocation: signal size mismatch");
  if (!(total_power > 0.0))
    throw Error("solve_detection_allocation: total power must be > 0");
  if (signal.cwiseAbs().maxCoeff() == 0.0)
    throw Error("solve_detection_allocation: signal is identically zero");

  // sum of powers is monotone decreasing in lambda.
  double lo = 1e-18, hi = 1.0;
  while (detection_powers(ch, signal, lo).sum() < total_power) {
    lo *= 0.25;
    if (lo < 1e-300)
      throw Error("solve_detection_allocation: multiplier bracket failed");
  }
  while (detection_powers(ch, signal, hi).sum() > total_power) {
    hi *= 4.0;
    if (hi > 1e300)
      throw Error("solve_detection_allocation: multiplier bracket failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detection_powers(ch, signal, mid).sum() >= total_power)
      lo = mid;
    else
      hi = mid;
  }

  DetectionAllocation out;
  out.lambda = lo;
  out.power = detection_powers(ch, signal, lo);
  // Scale onto the budget exactly; the active coordinates share the residual
  // proportionally (the bisection leaves only a ~1e-60 interval, this keeps
  // the sum construct exact).
  const double sum = out.power.sum();
  if (sum > 0.0) out.power *= total_power / sum;
  out.bits = Vector(ch.size());
  for (int k = 0; k < ch.size(); ++k)
    out.bits(k) = bits_from_power(out.power(k), ch.gain(k));
  out.deflection = detection_deflection(ch, signal, out.power);
  out.pd = q_function(q_inverse(pfa) - std::sqrt(out.deflection));
  return out;
}

}  // namespace simlab
