#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace hgcl {

/// Deterministic random stream. All draws are derived from the raw 64-bit
/// generator output, so sequences are identical across platforms and
/// standard-library versions for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Independent stream for a named purpose (init, mixup, splits, ...).
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed + 0x9e3779b97f4a7c15ull * (stream + 1)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Unbiased (Lemire rejection).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::runtime_error("uniform_int: n must be positive");
    const std::uint64_t threshold = (-n) % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      const __uint128_t m = static_cast<__uint128_t>(x) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  int index(int n) { return static_cast<int>(uniform_int(static_cast<std::uint64_t>(n))); }

  /// Standard normal via Box-Muller (non-caching).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::runtime_error("gamma: shape must be positive");
    if (shape < 1.0) {
      return gamma(shape + 1.0) * std::pow(uniform_pos(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Beta(a, a). Exactly Uniform(0,1) when a == 1.
  double beta_symmetric(double a) {
    if (a <= 0.0) throw std::runtime_error("beta_symmetric: a must be positive");
    if (a == 1.0) return uniform();
    const double x = gamma(a);
    const double y = gamma(a);
    const double s = x + y;
    return s > 0.0 ? x / s : 0.5;
  }

 private:
  std::uint64_t state_;

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

/// Named stream ids used by the pipeline so that consuming randomness in one
/// phase cannot perturb another.
enum class RngStream : std::uint64_t {
  ParamInit = 1,
  Mixup = 2,
  Splits = 3,
  Graph = 4,
};

inline Rng derive_rng(std::uint64_t seed, RngStream stream) {
  return Rng::derive(seed, static_cast<std::uint64_t>(stream));
}

}  // namespace hgcl
