#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace pcgap {

/// SplitMix64 finalizer. Used for seeding and for deriving independent
/// stream seeds from task identities.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Combines a base seed with a sequence of identifiers (restart index, task
/// coordinates, ...) into a new 64-bit seed. Order-sensitive.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> ids) noexcept;

/// xoshiro256** generator seeded through SplitMix64.
///
/// Streams are addressed by (seed, stream); two different streams of the same
/// seed are statistically independent for all practical purposes. Gaussian
/// variates use the Marsaglia polar transform on top of the 53-bit uniform, so
/// every draw is a fixed function of the integer stream (no standard-library
/// distribution objects, whose algorithms differ across implementations).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal.
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pcgap
