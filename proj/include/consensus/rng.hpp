#pragma once

#include <cstddef>
#include <cstdint>

namespace consensus {

// splitmix64 finalizer. All seeded randomness in the library derives from it,
// so results are reproducible across platforms and worker counts.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-observation tie stream, shared by every aggregation strategy: the draw
// is keyed by (seed, observation id) only, so a tie that persists across
// iterations resolves identically every time, and evaluation order (including
// parallel scheduling) cannot influence it.
inline constexpr std::uint64_t tie_value(std::uint64_t seed, std::uint32_t obs) noexcept {
  return splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(obs) + 0x9e3779b97f4a7c15ULL));
}

// Index into the ascending list of tied candidates.
inline constexpr std::size_t tie_pick(std::uint64_t seed, std::uint32_t obs,
                                      std::size_t n_tied) noexcept {
  return n_tied <= 1 ? 0 : static_cast<std::size_t>(tie_value(seed, obs) % n_tied);
}

// Small deterministic generator for synthetic data and tests. Modulo bias in
// below() is irrelevant at the bounds we draw and keeps the stream portable.
class SplitMix {
 public:
  explicit constexpr SplitMix(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint32_t below(std::uint32_t bound) noexcept {
    return bound ? static_cast<std::uint32_t>(next() % bound) : 0u;
  }

  // Uniform double in [0, 1).
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

}  // namespace consensus
