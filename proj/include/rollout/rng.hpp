#pragma once

#include <cstdint>
#include <initializer_list>

namespace rollout {

/// SplitMix64 finalizer. Bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Folds a sequence of words into one key; order sensitive.
std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) noexcept;

/// Counter-based generator. A stream is fully determined by its key, so the
/// same (seed, phase, slot, draw) tuple yields the same numbers regardless of
/// which thread or in what order streams are consumed.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}
  CounterRng(std::uint64_t seed, std::uint64_t phase, std::uint64_t slot, std::uint64_t draw) noexcept
      : key_(hash_words({seed, phase, slot, draw})) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal via Box-Muller (one value per call, deterministic).
  double normal() noexcept;

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rollout
