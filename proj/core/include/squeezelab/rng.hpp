#pragma once

#include <cmath>
#include <cstdint>

namespace squeezelab {

// SplitMix64 (Steele, Lea, Vigna) — used to expand a (seed, stream) pair into
// generator state so every noise port gets an independent substream.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t s) : state(s) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

// xoshiro256++ (Blackman, Vigna). Fully determined by (seed, stream); streams
// with distinct ids never share state, so adding a noise port to a simulation
// leaves every existing stream untouched.
class Rng {
 public:
  Rng() : Rng(0, 0) {}

  Rng(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 sm(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
    for (auto& w : s_) w = sm.next();
    spare_valid_ = false;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the polar (Marsaglia) method; deterministic for a
  // given stream regardless of standard-library implementation.
  double gaussian() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    spare_valid_ = true;
    return u * f;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool spare_valid_ = false;
};

}  // namespace squeezelab
