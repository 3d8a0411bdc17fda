#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace fatreat::stats {

/// splitmix64 finalizer; used to decorrelate seeds of derived streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded source of randomness. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; normals and gammas come from
/// Boost.Random, whose algorithms are fixed per Boost release. A stream is
/// therefore bit-reproducible for a given seed and Boost version.
///
/// Streams are not thread-safe. Each worker should own a stream obtained via
/// derive(), which maps (parent seed, index) to
/// splitmix64(parent_seed ^ splitmix64(index)). Deriving does not consume
/// draws from the parent.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  RandomStream derive(std::uint64_t index) const {
    return RandomStream(splitmix64(seed_ ^ splitmix64(index)));
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    // 53 random bits, shifted by half an ulp so neither endpoint occurs.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return boost::random::normal_distribution<double>()(engine_); }

  /// Standard exponential (rate 1), strictly positive.
  double exponential() { return -std::log(uniform()); }

  /// Gamma(shape, scale = 1).
  double gamma(double shape) {
    return boost::random::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = engine_type::max() - engine_type::max() % n;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r < limit) return r % n;
    }
  }

  engine_type& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  engine_type engine_;
};

}  // namespace fatreat::stats
