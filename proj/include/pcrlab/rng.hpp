#pragma once

#include <cstdint>
#include <limits>

namespace pcrlab {

/// SplitMix64 finalizer. Bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream key from a parent seed and up to two indices.
/// Used for per-replicate seeds: derive_seed(master, n, replicate_index).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t h = mix64(parent + kGamma);
  h = mix64(h ^ (a + 2 * kGamma));
  h = mix64(h ^ (b + 3 * kGamma));
  return h;
}

/// Counter-based 64-bit generator (SplitMix64).
///
/// The k-th output (k = 1, 2, ...) of the stream with key K is
///   mix64(K + k * 0x9e3779b97f4a7c15)
/// so any draw can be recomputed from (key, counter) alone. All distribution
/// transforms used by the library are defined here rather than taken from
/// <random>, whose distributions are implementation-defined:
///   uniform()      = (u >> 11) * 2^-53                      in [0, 1)
///   uniform_open() = ((u >> 11) + 1) * 2^-53                in (0, 1]
///   normal()       = Box-Muller on (uniform_open(), uniform()); the cosine
///                    branch is returned first, the sine branch is cached
///   rademacher()   = +1 if the top bit of u is set, else -1
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_open() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() noexcept;

  double rademacher() noexcept {
    return (next_u64() >> 63) != 0 ? 1.0 : -1.0;
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace pcrlab
