#pragma once

#include <cstdint>
#include <random>

namespace coherence_forge {

/// SplitMix64 finalizer. Used as a counter-based hash so that sub-streams
/// can be derived from (seed, index) without touching any shared state.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the sub-stream `index` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t index) noexcept {
  return splitmix64(seed ^ index);
}

/// Seed for a multi-index sub-stream, e.g. (seed, k, snr, trial).
template <class Next, class... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                    Next next, Rest... rest) noexcept {
  return derive_seed(derive_seed(seed, index), static_cast<std::uint64_t>(next),
                     static_cast<std::uint64_t>(rest)...);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) {
  return Engine(splitmix64(seed));
}

} // namespace coherence_forge
