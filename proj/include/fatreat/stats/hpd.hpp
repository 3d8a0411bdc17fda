#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fatreat/errors.hpp"

namespace fatreat::stats {

struct Interval {
  double lo;
  double hi;
};

inline constexpr std::size_t kMinHpdDraws = 10;

/// Highest posterior density interval from sorted draws x_0 <= ... <= x_{m-1}.
///
/// Scans every window [x_i, x_{i+g}] with g = ceil(level * m) (capped at
/// m - 1) and returns the narrowest, the first one on ties. This is the
/// coda::HPDinterval convention, except that g is rounded up.
inline Interval hpd_interval(std::span<const double> sorted, double level) {
  if (sorted.size() < kMinHpdDraws) throw InsufficientData("hpd_interval: need at least 10 draws");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("hpd_interval: level must lie in (0,1)");
  if (!std::is_sorted(sorted.begin(), sorted.end()))
    throw InvalidArgument("hpd_interval: draws must be sorted");
  const std::size_t m = sorted.size();
  std::size_t gap = static_cast<std::size_t>(std::ceil(level * static_cast<double>(m) - 1e-9));
  gap = std::clamp<std::size_t>(gap, 1, m - 1);
  std::size_t best = 0;
  double best_width = sorted[gap] - sorted[0];
  for (std::size_t i = 1; i + gap < m; ++i) {
    const double width = sorted[i + gap] - sorted[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {sorted[best], sorted[best + gap]};
}

/// Convenience overload that sorts a copy.
inline Interval hpd_interval_unsorted(std::vector<double> draws, double level) {
  std::sort(draws.begin(), draws.end());
  return hpd_interval(draws, level);
}

}  // namespace fatreat::stats
