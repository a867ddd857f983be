#pragma once

#include <cstddef>
#include <cstdint>

namespace agentcomm {

/// SplitMix64 finalizer. Used both as the generator's output function and as
/// a standalone hash for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Seed of sub-stream `id` split from `seed`.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t id) noexcept
{
  return mix64(seed + (id + 1) * kGolden);
}

/// Deterministic SplitMix64 generator. Draw sequences are identical on every
/// platform: uniform reals take the top 53 bits scaled by 2^-53.
class SplitMix64
{
public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_{seed} {}

  constexpr std::uint64_t next() noexcept
  {
    state_ += kGolden;
    return mix64(state_);
  }

  constexpr std::uint64_t operator()() noexcept { return next(); }

  /// Uniform real in [0, 1).
  constexpr double uniform() noexcept
  {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). One draw; n == 0 returns 0.
  constexpr std::size_t index(std::size_t n) noexcept
  {
    if (n == 0) {
      return 0;
    }
    auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  /// Independent generator for sub-stream `id`; does not advance this one.
  constexpr SplitMix64 split(std::uint64_t id) const noexcept
  {
    return SplitMix64{split_seed(state_, id)};
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

private:
  std::uint64_t state_;
};

} // namespace agentcomm
