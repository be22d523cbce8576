#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fmd {

/// SplitMix64 with the standard golden-ratio increment and finalizer.
///
/// Every random draw in the toolkit (dataset pixels, weight init, shuffles,
/// splits, bootstrap resamples) comes from one of these streams, so two
/// implementations that follow the documented draw order produce
/// byte-identical artifacts.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) on the 2^-53 grid.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); plain modulo reduction.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  // Box-Muller. Draws u1 then u2, returns r*cos first and caches r*sin for the
  // following call.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Child seed for stage/tree/fold `index` of a parent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 g(seed ^ (0xD1B54A32D192ED03ULL * (index + 1)));
  return g.next();
}

}  // namespace fmd
