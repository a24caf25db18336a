#pragma once

// Counter-keyed random streams.
//
// Every random consumer in the library receives an explicit Rng. Parallel
// code derives one Rng per logical task from (seed, key...) so results do not
// depend on how tasks are scheduled onto threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace treeising {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// xoshiro256** engine. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  /// Independent substream keyed by (seed, keys...).
  template <class... Keys>
  static Rng stream(std::uint64_t seed, Keys... keys) noexcept {
    std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
    ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(keys) + 0x2545f4914f6cdd1dULL))), ...);
    return Rng(h);
  }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      w = splitmix64(x);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
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
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's nearly divisionless method.
    __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<__uint128_t>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard exponential variate.
  double exponential() noexcept { return -std::log1p(-uniform()); }

  bool coin() noexcept { return ((*this)() >> 63) != 0; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4]{};
};

/// Sampler for a finitely supported law on {0, ..., size-1}.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> weights) : cdf_(weights.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
        throw std::invalid_argument("DiscreteSampler: weights must be finite and non-negative");
      acc += weights[i];
      cdf_[i] = acc;
    }
    if (!(acc > 0.0)) throw std::invalid_argument("DiscreteSampler: total weight must be positive");
    for (auto& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  std::size_t operator()(Rng& rng) const noexcept {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    // upper_bound never lands on a zero-mass atom.
    return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

  std::size_t size() const noexcept { return cdf_.size(); }
  bool empty() const noexcept { return cdf_.empty(); }

 private:
  std::vector<double> cdf_;
};

/// Fisher-Yates shuffle driven by Rng (std::shuffle's draw sequence is
/// implementation-defined, this one is not).
template <class T>
void shuffle(std::span<T> items, Rng& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace treeising
