#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace stitchkit {

// SplitMix64 generator. Hand-rolled so that identical seeds give identical
// streams on every platform; std::uniform_*_distribution is
// implementation-defined and would break bit-for-bit reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + uniform01() * (b - a); }

  // Uniform index in [0, n). Modulo bias is < 2^-53 for any realistic n.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller. Always consumes exactly two uniforms so the stream position
  // does not depend on call history.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Derives an independent stream seed from (seed, stream id).
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed ^ (0xA24BAED4963EE407ull * (stream + 0x9E3779B97F4A7C15ull)));
    return r.next_u64();
  }

 private:
  std::uint64_t state_;
};

}  // namespace stitchkit
