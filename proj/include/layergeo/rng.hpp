#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace layergeo {

using Engine = std::mt19937_64;

/// Fixed stream identifiers so that every consumer of a user seed draws from
/// its own independent sequence.
enum class Stream : std::uint64_t {
  anchors = 1,
  pairs = 2,
  bootstrap_curv = 3,
  bootstrap_mono = 4,
  bootstrap_rank = 5,
  token_subsample = 6,
  projection = 7,
  particles = 8,
  synth = 9,
  bridge = 10,
  split = 11,
  jitter = 12,
};

/// SplitMix64 finaliser; used to decorrelate (seed, stream, index) triples.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream), index);
}

/// Engine for parallel unit `index` of `stream`. Results never depend on
/// which thread executes the unit.
Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

/// `count` distinct indices from [0, population), ascending.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    Engine& engine);

}  // namespace layergeo
