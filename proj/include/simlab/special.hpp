#pragma once

#include <cstdint>
#include <optional>

namespace simlab {

/// Bessel function of the first kind, order 1, for x >= 0.
/// Extended-precision power series below x = 22 (covers every argument the
/// spectral predictions produce), Hankel asymptotic form beyond.
double bessel_j1(double x);

/// Gaussian right-tail probability Q(x) = P(Z > x).
double q_function(double x);

/// Inverse of q_function, accurate to ~1e-13 over (0, 1).
double q_inverse(double p);

/// Connectivity-preserving coverage radius R * sqrt(log n / n) for n >= 2
/// nodes in a region of radius R.
double coverage_radius(std::size_t n, double region_radius);

/// Asymptotic algebraic-connectivity prediction for a torus RGG:
/// pi*n*r^2 - n*r*J1(2*pi*r), together with the predicted mean degree
/// pi*r^2*n. Valid for 0 < r <= 0.5.
struct RggSpectrumPrediction {
  double lambda2;
  double mean_degree;
};
RggSpectrumPrediction rgg_lambda2_prediction(std::size_t n, double r);

/// Number of distinct histograms of n samples over a given alphabet:
/// C(n + alphabet - 1, alphabet - 1), with the classical sandwich bounds
/// (n/alphabet)^alphabet <= value <= (n+1)^alphabet.
///
/// `value` is empty when the binomial exceeds 64 bits; `log_value` is always
/// available.
struct HistogramCardinality {
  std::optional<std::uint64_t> value;
  double log_value;  // natural log of the exact binomial
  double lower_bound;
  double upper_bound;
};
HistogramCardinality histogram_cardinality(std::uint64_t n,
                                           std::uint64_t alphabet);

}  // namespace simlab
