#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pbc {

/// SplitMix64 finalizer; a bijective mix of a 64-bit word.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Sub-seed for (stream, index, sub) under one root seed. Any record of a
/// run can be regenerated in isolation from these coordinates alone.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index,
                          std::uint64_t sub = 0) noexcept;

/// Deterministic generator. The distributions are implemented here rather
/// than taken from <random>, whose distribution algorithms are unspecified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n), n > 0, without modulo bias.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pbc
