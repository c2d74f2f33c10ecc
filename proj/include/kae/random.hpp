#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace kae {

// Purpose tags for deriving independent random streams from one user seed.
enum class Stream : std::uint32_t {
  kInit = 1,
  kShuffle = 2,
  kSynth = 3,
  kDetect = 4,
  kDownstreamInit = 5,
  kDownstreamShuffle = 6,
  kMesh = 7,
};

// Engine keyed by (seed, stream, extra tags). Distinct keys give unrelated
// sequences; equal keys give identical ones.
inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream,
                                std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                   static_cast<std::uint32_t>(seed >> 32),
                                   static_cast<std::uint32_t>(stream)};
  for (std::uint64_t t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace kae
