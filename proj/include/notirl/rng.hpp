#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "notirl/errors.hpp"

namespace notirl {

// All randomness in the toolkit flows through this header. Distribution
// sampling is implemented by hand on top of std::mt19937_64 because the
// standard library's <random> distributions are not required to produce the
// same stream across implementations, and reproducibility down to the byte is
// part of the contract.

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h) {
  for (int i = 0; i < 8; ++i) {
    h ^= static_cast<unsigned char>(v >> (8 * i));
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Maps (seed, tag, index) to a well-separated engine seed so that independent
// parts of a run (user episodes, weight init, minibatch draws) own disjoint
// streams regardless of how many draws each one consumes.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = fnv1a64(tag);
  h = fnv1a64_u64(seed, h);
  h = fnv1a64_u64(index, h);
  return splitmix64(h);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits; never returns 1.0.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller. The pair's second value is kept for the next call so draw
  // parity stays deterministic.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return mean + stddev * (r * std::cos(theta));
  }

  // Inverse CDF; rate must be positive.
  double exponential(double rate) {
    if (!(rate > 0.0)) throw NumericError("exponential: rate must be > 0");
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return -std::log(u) / rate;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform index in [0, n). Modulo bias is below 2^-40 for any n that fits
  // in memory here, far under the reproducibility and statistical needs.
  std::size_t index(std::size_t n) {
    if (n == 0) throw NumericError("index: n must be > 0");
    return static_cast<std::size_t>(next_u64() % n);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline Rng substream(std::uint64_t seed, std::string_view tag,
                     std::uint64_t index = 0) {
  return Rng(derive_seed(seed, tag, index));
}

}  // namespace notirl
