#include "simlab/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace simlab {

double bessel_j1(double x) {
  if (x < 0.0) throw std::invalid_argument("bessel_j1: x must be >= 0");
  if (x < 22.0) {
    // J1(x) = (x/2) * sum_k (-1)^k (x^2/4)^k / (k! (k+1)!).
    // Long double absorbs the alternating-series cancellation up to x ~ 22.
    const long double q = static_cast<long double>(x) * x / 4.0L;
    long double term = static_cast<long double>(x) / 2.0L;
    long double sum = term;
    for (int k = 1; k < 80; ++k) {
      term *= -q / (static_cast<long double>(k) * (k + 1));
      sum += term;
      if (std::fabs(static_cast<double>(term)) <
          1e-22 * (1.0 + std::fabs(static_cast<double>(sum))))
        break;
    }
    return static_cast<double>(sum);
  }
  // Hankel asymptotic expansion, adequate for the large arguments that only
  // appear in diagnostics.
  const double z = 8.0 / x;
  const double y = z * z;
  const double p1 = 1.0 +
                    y * (0.183105e-2 +
                         y * (-0.3516396496e-4 +
                              y * (0.2457520174e-5 + y * (-0.240337019e-6))));
  const double q1 =
      0.04687499995 +
      y * (-0.2002690873e-3 +
           y * (0.8449199096e-5 +
                y * (-0.88228987e-6 + y * 0.105787412e-6)));
  const double chi = x - 2.356194491;  // x - 3*pi/4
  return std::sqrt(0.636619772 / x) *
         (std::cos(chi) * p1 - z * std::sin(chi) * q1);
}

double q_function(double x) { return 0.5 * std::erfc(x / M_SQRT2); }

namespace {

// Acklam-style rational approximation to the standard normal quantile,
// refined below with one Halley step against erfc.
double norm_quantile_approx(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double q_inverse(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("q_inverse: p must lie in (0, 1)");
  // Q(x) = p  <=>  x = -Phi^{-1}(p).
  double x = -norm_quantile_approx(p);
  // Two Newton refinements on f(x) = Q(x) - p; f'(x) = -phi(x).
  for (int i = 0; i < 2; ++i) {
    const double f = q_function(x) - p;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf < std::numeric_limits<double>::min()) break;
    x += f / pdf;
  }
  return x;
}

double coverage_radius(std::size_t n, double region_radius) {
  if (n < 2) throw std::invalid_argument("coverage_radius: n must be >= 2");
  const double nd = static_cast<double>(n);
  return region_radius * std::sqrt(std::log(nd) / nd);
}

RggSpectrumPrediction rgg_lambda2_prediction(std::size_t n, double r) {
  if (!(r > 0.0 && r <= 0.5))
    throw std::invalid_argument("rgg_lambda2_prediction: need 0 < r <= 0.5");
  const double nd = static_cast<double>(n);
  RggSpectrumPrediction out;
  out.mean_degree = M_PI * r * r * nd;
  out.lambda2 = out.mean_degree - nd * r * bessel_j1(2.0 * M_PI * r);
  return out;
}

HistogramCardinality histogram_cardinality(std::uint64_t n,
                                           std::uint64_t alphabet) {
  if (n < 1 || alphabet < 1)
    throw std::invalid_argument("histogram_cardinality: n, alphabet >= 1");
  HistogramCardinality out{};

  // C(n + alphabet - 1, alphabet - 1) in 128-bit arithmetic with overflow
  // detection; the log-domain value always comes from lgamma.
  const std::uint64_t top = n + alphabet - 1;
  const std::uint64_t k = alphabet - 1;
  out.log_value = std::lgamma(static_cast<double>(top) + 1.0) -
                  std::lgamma(static_cast<double>(k) + 1.0) -
                  std::lgamma(static_cast<double>(top - k) + 1.0);

  // The running value C(top-k+i, i) is nondecreasing in i, so bailing out as
  // soon as it exceeds 64 bits is sound, and the check keeps the 128-bit
  // intermediate product from wrapping.
  bool overflow = false;
  unsigned __int128 acc = 1;
  const unsigned __int128 cap =
      static_cast<unsigned __int128>(std::numeric_limits<std::uint64_t>::max());
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (top - k + i) / i;  // exact at every step
    if (acc > cap) {
      overflow = true;
      break;
    }
  }
  if (!overflow) out.value = static_cast<std::uint64_t>(acc);

  const double a = static_cast<double>(alphabet);
  out.lower_bound = std::pow(static_cast<double>(n) / a, a);
  out.upper_bound = std::pow(static_cast<double>(n) + 1.0, a);
  return out;
}

}  // namespace simlab
