#pragma once

#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

#include "fatreat/errors.hpp"

namespace fatreat::stats {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kSqrt1_2 = 0.70710678118654752440;

/// Standard normal density. Returns 0 for infinite arguments.
inline double norm_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

inline double norm_log_pdf(double z) { return -kLogSqrt2Pi - 0.5 * z * z; }

/// Phi(z), via erfc so the lower tail keeps full relative precision.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * kSqrt1_2); }

/// 1 - Phi(z), never formed as a difference.
inline double norm_sf(double z) { return 0.5 * std::erfc(z * kSqrt1_2); }

/// Mills ratio R(z) = (1 - Phi(z)) / phi(z) for z >= 0.
///
/// Below 5 the ratio is taken from erfc directly; above, from the Laplace
/// continued fraction R(z) = 1/(z + 1/(z + 2/(z + 3/(z + ...)))) evaluated
/// backwards, which stays finite long after phi(z) underflows.
inline double mills_ratio(double z) {
  if (std::isinf(z)) return 0.0;
  if (z < 5.0) return norm_sf(z) / norm_pdf(z);
  double tail = z;
  for (int k = 120; k >= 1; --k) tail = z + k / tail;
  return 1.0 / tail;
}

/// log Phi(z). The lower tail goes through the Mills ratio, so the value is
/// finite for any finite z.
inline double norm_log_cdf(double z) {
  if (z >= -5.0) return std::log(norm_cdf(z));
  return norm_log_pdf(z) + std::log(mills_ratio(-z));
}

/// log(1 - Phi(z)).
inline double norm_log_sf(double z) { return norm_log_cdf(-z); }

/// Inverse of Phi on (0, 1).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("norm_quantile: p must lie in (0,1)");
  using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p, Policy());
}

/// The two selection-correction terms of the observed-outcome moments,
///   c0(m) = -phi(m) / (1 - Phi(m)),   c1(m) = phi(m) / Phi(m).
/// Whichever tail probability is small is replaced by phi * Mills ratio, so
/// both terms are finite and c1(m) == -c0(-m) holds exactly.
struct MillsTerms {
  double c0;
  double c1;
};

inline MillsTerms mills_terms(double m) {
  auto lower = [](double u) {
    // phi(u) / Phi(u)
    if (u <= 0.0) return 1.0 / mills_ratio(-u);
    return norm_pdf(u) / (1.0 - norm_sf(u));
  };
  return {-lower(-m), lower(m)};
}

}  // namespace fatreat::stats
