#pragma once

#include <cstdint>
#include <random>

namespace rrm {

/// Seeded random source with platform-independent uniform and normal draws.
///
/// The engine is std::mt19937_64; the distribution transforms are spelled out
/// here because the standard library distributions are implementation-defined
/// and checkpoints must not depend on which one was linked.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Derives an independent stream, e.g. one per sample.
  Rng fork(std::uint64_t stream) {
    return Rng(engine_() ^ (0x9E3779B97F4A7C15ull * (stream + 1)));
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rrm
