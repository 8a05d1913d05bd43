#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ptree/numeric.hpp"

// Seeded randomness. Distribution transforms are implemented here rather
// than taken from <random> because libstdc++ leaves gamma/normal variate
// algorithms implementation-defined; every draw below is a pure function of
// the engine stream, so seeds reproduce bit-identically.

namespace ptree {

// splitmix64 finalizer, used both as a mixer and for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: independent streams for (replicate, draw,
// arm, ...) indices regardless of execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ (a + 0x165667b19e3779f9ULL));
  h = mix64(h ^ (b + 0x27d4eb2f165667c5ULL));
  h = mix64(h ^ (c + 0x85ebca6b2b2ae35ULL));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(mix64(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on (0,1): 53-bit mantissa, never returns 0 or 1.
  double uniform() {
    double u = (eng_() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }

  // Box-Muller; the second variate is discarded to keep the stream stateless.
  double normal() {
    double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia-Tsang squeeze for shape >= 1, boosted for shape < 1.
  double gamma(double shape, double scale = 1.0) {
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double cc = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + cc * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
  }

  double beta(double a, double b) {
    double x = gamma(a), y = gamma(b);
    return x / (x + y);
  }

  // Inverse-cdf sampler for N(mu, sigma^2) truncated to [lo, hi].
  double truncated_normal(double mu, double sigma, double lo, double hi) {
    double fa = normal_cdf((lo - mu) / sigma);
    double fb = normal_cdf((hi - mu) / sigma);
    double u = fa + uniform() * (fb - fa);
    u = std::min(std::max(u, std::nextafter(0.0, 1.0)), std::nextafter(1.0, 0.0));
    double x = mu + sigma * normal_quantile(u);
    return std::min(std::max(x, lo), hi);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ptree
