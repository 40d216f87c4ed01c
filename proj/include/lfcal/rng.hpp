#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lfcal {

/// Deterministic random source. Draws are taken straight from mt19937_64 and
/// mapped to doubles by fixed arithmetic, so sequences are reproducible for a
/// given seed across platforms and standard library versions (the std::
/// distributions make no such guarantee).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  uint64_t index(uint64_t n) { return static_cast<uint64_t>(uniform() * static_cast<double>(n)); }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Independent child stream: the label is mixed through splitmix64 so
  /// sibling streams do not correlate.
  Rng fork(uint64_t label) {
    uint64_t z = engine_() + 0x9e3779b97f4a7c15ull * (label + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lfcal
