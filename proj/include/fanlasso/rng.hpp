#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "fanlasso/common.hpp"

namespace fanlasso {

// Deterministic 64-bit generator used everywhere randomness is needed.
//
// The core is splitmix64: a counter marching by the golden-ratio increment,
// hashed through the Stafford mix13 finalizer. Identical sequences on every
// platform, trivially seedable, and cheap to fork into independent streams.
//
// Stream derivation rule (the only way substreams are made):
//   derive(seed, stream)            = mix(mix(seed ^ (stream+1)*K1) ^ K2)
// Experiments chain it: the stream for (replication r, role k) is
//   derive(derive(master_seed, r), role_k)
// so any replication or role can be regenerated in isolation, in any order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform on [0,1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // +scale or -scale with equal probability.
  double rademacher(double scale = 1.0) {
    return (next_u64() >> 63) ? scale : -scale;
  }

  // Box-Muller. Generates pairs; the spare standard normal is cached.
  double gaussian(double mean = 0.0, double sd = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + sd * spare_;
    }
    // u1 on (0,1] so the log is finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return mean + sd * r * std::cos(a);
  }

  // Unbiased integer on [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: n must be positive");
    const std::uint64_t limit = ~0ULL - ~0ULL % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed ^ (stream + 1) * 0xA24BAED4963EE407ULL) ^ 0x9FB21C651E98DF25ULL);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Fisher-Yates over indices 0..n-1.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace fanlasso
