#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "layergeo/dumpio.hpp"
#include "layergeo/types.hpp"

namespace layergeo {

enum class Pooling { mean, last, token };

std::string to_string(Pooling pooling);
Pooling pooling_from_string(const std::string& name);

struct ExtractConfig {
  Pooling pooling = Pooling::mean;
  std::size_t max_seqs = 2000;
  std::size_t max_tokens = 200000;
  std::size_t proj_dim = 0;  // 0 disables projection
  std::uint64_t seed = 0;
};

struct RepresentationSet {
  RowMatrix x;
  int source_layer = 0;
  Pooling pooling = Pooling::mean;
  std::size_t m_before_projection = 0;
  std::size_t d_before_projection = 0;
  bool projected = false;
};

/// Masked average over valid tokens, one row per sequence.
RowMatrix pool_mean(const Tensor3& acts, const Mask& mask);

/// Hidden state at the last valid position of each sequence.
RowMatrix pool_last(const Tensor3& acts, const Mask& mask);

/// All valid tokens flattened in (sequence, position) order; when more than
/// max_tokens are valid, a seeded uniform subset is kept in that same order.
RowMatrix pool_token(const Tensor3& acts, const Mask& mask, std::size_t max_tokens, std::uint64_t seed);

/// D x p matrix with orthonormal columns from a seeded Gaussian draw.
Matrix projection_basis(std::size_t input_dim, std::size_t proj_dim, std::uint64_t seed);

struct Projected {
  RowMatrix x;
  bool applied = false;
};

/// x R for an orthonormal R; skipped when proj_dim == 0 or proj_dim >= D.
Projected random_projection(const RowMatrix& x, std::size_t proj_dim, std::uint64_t seed);

/// Applies the max_seqs cap (first sequences in dump order), pooling and
/// optional projection.
RepresentationSet extract(const Tensor3& acts, const Mask& mask, int layer, const ExtractConfig& cfg);

}  // namespace layergeo
