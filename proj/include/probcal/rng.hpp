// Counter-based random streams (Philox4x32-10).
//
// Every stochastic operation in the library draws from a RandomStream that is
// addressed by (seed, path...). A stream's output depends only on its address
// and on how many values have been consumed from it, never on scheduling, so
// parallel simulations stay reproducible regardless of thread count.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>

namespace probcal {

/// SplitMix64 finalizer; used to hash stream addresses into keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// The raw Philox4x32 bijection with 10 rounds.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  /// Derives an independent child stream; the parent is not advanced.
  [[nodiscard]] RandomStream split(std::uint64_t id) const;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform double strictly inside (0, 1), 53-bit resolution.
  double uniform() noexcept;

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // UniformRandomBitGenerator surface.
  using result_type = std::uint32_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return 0xFFFFFFFFu; }
  result_type operator()() noexcept { return next_u32(); }

 private:
  RandomStream(std::array<std::uint32_t, 2> key, std::uint64_t stream_id);

  void refill() noexcept;

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_id_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned used_ = 4;
};

}  // namespace probcal
