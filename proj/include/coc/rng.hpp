#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace coc {

// SplitMix64 step; used for seeding and for deriving child streams.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** generator with a splittable seeding scheme.
///
/// A stream is identified by (seed, path). `child(i)` derives an independent
/// stream from the identity of this one without advancing it, so replications
/// and Monte-Carlo blocks can be assigned streams by index and merged in a
/// fixed order regardless of thread scheduling.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t path = 0) noexcept
      : seed_(seed), path_(path) {
    std::uint64_t sm = seed ^ (path * 0xD1B54A32D192ED03ULL);
    for (auto& s : s_) s = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next(); }

  result_type next() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  double uniform_pos() noexcept { return 1.0 - uniform(); }

  /// Exponential with unit mean.
  double exponential() noexcept { return -std::log(uniform_pos()); }

  /// Uniform integer in [0, bound), bound > 0 (Lemire's method).
  std::uint64_t below(std::uint64_t bound) noexcept {
    __uint128_t m = static_cast<__uint128_t>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<__uint128_t>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Independent stream derived from this stream's identity (not its state).
  [[nodiscard]] RngStream child(std::uint64_t index) const noexcept {
    std::uint64_t sm = path_ ^ 0xA0761D6478BD642FULL;
    const std::uint64_t a = splitmix64(sm);
    std::uint64_t sm2 = index + a;
    const std::uint64_t b = splitmix64(sm2);
    return RngStream(seed_, a ^ (b + 0x9E3779B97F4A7C15ULL));
  }

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t path_;
  std::uint64_t s_[4]{};
};

}  // namespace coc
