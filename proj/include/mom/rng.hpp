#pragma once

// Seeded, splittable random streams. Every variate is derived from integer
// arithmetic plus <cmath> transforms, so a (seed, stream) pair reproduces the
// same sequence on any platform with an IEEE-conforming libm.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace mom {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SeededStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  // Independent sub-stream, e.g. one per grid point of a sweep.
  SeededStream child(std::uint64_t k) const noexcept {
    return {seed, splitmix64_mix(stream ^ splitmix64_mix(k + 0x632be59bd9b4e019ULL))};
  }

  friend bool operator==(const SeededStream&, const SeededStream&) = default;
};

// xoshiro256** seeded through splitmix64 from (seed, stream).
class Rng {
 public:
  explicit Rng(SeededStream s) noexcept {
    std::uint64_t x = splitmix64_mix(s.seed) ^
                      splitmix64_mix(s.stream + 0x9e3779b97f4a7c15ULL);
    for (auto& w : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      w = splitmix64_mix(x);
    }
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1): (k + 1/2) 2^-52 for a 52-bit k.
  double uniform_open() noexcept {
    const std::uint64_t k = next_u64() >> 12;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-52;
  }

  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  double exponential() noexcept { return -std::log(uniform_open()); }

  // Box-Muller; one variate per call keeps streams position-independent.
  double normal() noexcept {
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double theta = 2.0 * std::numbers::pi * uniform_open();
    return r * std::cos(theta);
  }

  template <class T>
  void shuffle(std::span<T> v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace mom
