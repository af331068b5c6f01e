#pragma once

#include <cmath>
#include <cstdint>

namespace ppvrule {

/// Small self-contained counter-free PRNG (splitmix64 core). All simulation
/// and optimizer randomness flows through this so that a given seed produces
/// the same stream on every platform and under any thread schedule.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); never returns an exact endpoint.
  double uniform_open() {
    double u = uniform();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (stateless variant, two uniforms per draw).
  double normal() {
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Logistic(0, 1) noise draw.
  double logistic() {
    double u = uniform_open();
    return std::log(u / (1.0 - u));
  }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  std::uint64_t state_;
};

/// Mixes a base seed with a stream tag so that independent consumers
/// (replicates, restarts, folds) get disjoint deterministic streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base ^ (0x9E3779B97F4A7C15ULL + (tag << 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Replicate r of a benchmark uses base_seed + r * kReplicateStride.
inline constexpr std::uint64_t kReplicateStride = 0x9E3779B1ULL;  // prime

}  // namespace ppvrule
