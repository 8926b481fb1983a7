#pragma once

#include <cstdint>
#include <random>

namespace rovtl {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent streams from one seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return mix64(mix64(mix64(base) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(base, stream, index));
}

// Stream tags keep the per-purpose generators apart.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kTabularAugment = 2;
inline constexpr std::uint64_t kImageAugment = 3;
inline constexpr std::uint64_t kBatchOrder = 4;
inline constexpr std::uint64_t kNestedPair = 5;
inline constexpr std::uint64_t kSweep = 6;
inline constexpr std::uint64_t kForest = 7;
inline constexpr std::uint64_t kSynth = 8;
}  // namespace streams

}  // namespace rovtl
