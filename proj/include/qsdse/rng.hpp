#pragma once

#include <cstdint>
#include <random>

namespace qsdse {

/// Seeded random source used by every stochastic component. Wraps mt19937_64
/// with explicit draw helpers so that a given seed produces the same stream
/// on every platform (no std::*_distribution, whose output is
/// implementation-defined).
class RandomSource {
public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be > 0. Modulo bias is negligible for
  /// the small ranges used here (impl counts, buffer sizes).
  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(engine_() % n);
  }

  /// Uniform double in [lo, hi).
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  std::uint64_t next_u64() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

} // namespace qsdse
