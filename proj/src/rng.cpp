#include "layergeo/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace layergeo {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Engine(derive_seed(seed, stream, index));
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    Engine& engine) {
  if (count > population) {
    throw std::invalid_argument("sample_without_replacement: count exceeds population");
  }
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (count == population) return all;
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, engine);
  return out;
}

}  // namespace layergeo
