#pragma once

#include <cstdint>
#include <random>

namespace rbmcda {

/// Chain-level generator.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent per-particle substreams
/// from a step key so draws do not depend on scheduling order.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double uniform01(Rng& rng) { return to_unit(rng()); }

/// Uniform draw for substream `index` under `key`.
constexpr double stream_uniform(std::uint64_t key, std::uint64_t index) {
  return to_unit(mix64(key ^ mix64(index + 0x632be59bd9b4e019ULL)));
}

/// Seed for chain c of a run seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return mix64(seed ^ mix64(stream)); }

}  // namespace rbmcda
