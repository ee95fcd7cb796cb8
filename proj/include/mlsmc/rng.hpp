#pragma once

#include <cstdint>
#include <random>

namespace mlsmc {

using Rng = std::mt19937_64;

/// Independent sub-stream tags. Every random draw in a run comes from a
/// stream keyed by (root seed, purpose, level, index), so results do not
/// depend on how work is scheduled across threads.
enum class StreamPurpose : std::uint64_t {
  kInitPrior = 1,
  kInitSelect = 2,
  kInitMutate = 3,
  kResample = 4,
  kMutate = 5,
  kObservationNoise = 6,
  kReplicate = 7,
  kFixture = 8,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, StreamPurpose purpose,
                                    std::uint64_t level, std::uint64_t index) noexcept {
  std::uint64_t h = mix64(root);
  h = mix64(h ^ static_cast<std::uint64_t>(purpose));
  h = mix64(h ^ (level + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ (index + 0x85157af5ULL));
  return h;
}

inline Rng make_stream(std::uint64_t root, StreamPurpose purpose, std::uint64_t level,
                       std::uint64_t index) {
  return Rng(derive_seed(root, purpose, level, index));
}

}  // namespace mlsmc
