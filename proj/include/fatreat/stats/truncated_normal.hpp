#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "fatreat/errors.hpp"
#include "fatreat/stats/normal.hpp"
#include "fatreat/stats/random_stream.hpp"

namespace fatreat::stats {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Open interval (lower, upper); either end may be infinite.
struct TruncationBounds {
  double lower = -kInf;
  double upper = kInf;

  static TruncationBounds positive() { return {0.0, kInf}; }
  static TruncationBounds negative() { return {-kInf, 0.0}; }

  void validate() const {
    if (std::isnan(lower) || std::isnan(upper) || !(lower < upper))
      throw InvalidArgument("TruncationBounds: require lower < upper");
  }
};

/// Tail mass below which trunc_moments refuses to evaluate.
inline constexpr double kDegenerateMassFloor = 1e-300;

struct TruncMoments {
  double mean;
  double variance;
};

namespace detail {

// Standardised moments of N(0,1) restricted to (a, b) with a >= 0. All terms
// are expressed relative to phi(a) so that nothing underflows before the
// mass itself does.
inline TruncMoments upper_tail_moments(double a, double b) {
  const double ratio = std::isinf(b) ? 0.0 : std::exp(-0.5 * (b - a) * (b + a));
  const double mass_rel = mills_ratio(a) - (std::isinf(b) ? 0.0 : ratio * mills_ratio(b));
  const double log_mass = norm_log_pdf(a) + std::log(mass_rel);
  if (!(mass_rel > 0.0) || log_mass < std::log(kDegenerateMassFloor))
    throw DegenerateError("trunc_moments: truncation interval carries negligible mass");
  const double first = (1.0 - ratio) / mass_rel;
  const double b_term = std::isinf(b) ? 0.0 : b * ratio;
  const double second = (a - b_term) / mass_rel;
  return {first, 1.0 + second - first * first};
}

}  // namespace detail

/// Mean and variance of N(mean, sd^2) truncated to bounds.
inline TruncMoments trunc_moments(double mean, double sd, const TruncationBounds& bounds) {
  if (!std::isfinite(mean) || !std::isfinite(sd) || !(sd > 0.0))
    throw InvalidArgument("trunc_moments: mean and sd must be finite, sd > 0");
  bounds.validate();
  const double a = (bounds.lower - mean) / sd;
  const double b = (bounds.upper - mean) / sd;

  TruncMoments z;
  if (a >= 0.0) {
    z = detail::upper_tail_moments(a, b);
  } else if (b <= 0.0) {
    z = detail::upper_tail_moments(-b, -a);
    z.mean = -z.mean;
  } else {
    // a < 0 < b: erf difference has no cancellation.
    const double mass = 0.5 * (std::erf(b * kSqrt1_2) - std::erf(a * kSqrt1_2));
    if (!(mass > kDegenerateMassFloor))
      throw DegenerateError("trunc_moments: truncation interval carries negligible mass");
    const double pa = norm_pdf(a), pb = norm_pdf(b);
    const double first = (pa - pb) / mass;
    const double a_term = std::isinf(a) ? 0.0 : a * pa;
    const double b_term = std::isinf(b) ? 0.0 : b * pb;
    z = {first, 1.0 + (a_term - b_term) / mass - first * first};
  }
  return {mean + sd * z.mean, sd * sd * z.variance};
}

namespace detail {

// N(0,1) restricted to (a, b) with a > 0.5: exponential proposal with the
// optimal rate (Robert 1995), or a uniform proposal when the interval is
// short enough that the exponential would overshoot b too often.
inline double sample_upper_tail(double a, double b, RandomStream& rng) {
  const double width = b - a;
  if (width < 1.0 && a * width < 0.5) {
    for (;;) {
      const double z = a + width * rng.uniform();
      if (rng.uniform() <= std::exp(0.5 * (a - z) * (a + z)) && z > a && z < b) return z;
    }
  }
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential() / rate;
    if (!(z < b)) continue;
    const double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d) && z > a) return z;
  }
}

// Inverse-CDF draw from N(0,1) restricted to (a, b) with a <= 0.
inline double sample_inverse_cdf(double a, double b, RandomStream& rng) {
  const double pa = norm_cdf(a);
  const double pb = norm_cdf(b);
  for (;;) {
    const double u = pa + (pb - pa) * rng.uniform();
    if (!(u > 0.0 && u < 1.0)) continue;
    const double z = norm_quantile(u);
    if (z > a && z < b) return z;
  }
}

}  // namespace detail

/// Draw from N(mean, sd^2) restricted to the open interval `bounds`.
///
/// Standardised bounds (a, b): if a > 0.5 the upper-tail rejection sampler
/// is used, if b < -0.5 the mirrored one, otherwise inverse CDF on whichever
/// side of zero keeps the uniform away from 1.
inline double sample_truncated_normal(double mean, double sd, const TruncationBounds& bounds,
                                      RandomStream& rng) {
  if (!std::isfinite(mean) || !std::isfinite(sd) || !(sd > 0.0))
    throw InvalidArgument("sample_truncated_normal: mean and sd must be finite, sd > 0");
  bounds.validate();
  const double a = (bounds.lower - mean) / sd;
  const double b = (bounds.upper - mean) / sd;
  for (;;) {
    double z;
    if (a > 0.5) {
      z = detail::sample_upper_tail(a, b, rng);
    } else if (b < -0.5) {
      z = -detail::sample_upper_tail(-b, -a, rng);
    } else if (a > 0.0) {
      z = -detail::sample_inverse_cdf(-b, -a, rng);
    } else {
      z = detail::sample_inverse_cdf(a, b, rng);
    }
    const double x = mean + sd * z;
    // Rounding in mean + sd*z can land on a bound; redraw.
    if (x > bounds.lower && x < bounds.upper) return x;
  }
}

}  // namespace fatreat::stats
