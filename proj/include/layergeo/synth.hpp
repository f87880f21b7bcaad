#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "layergeo/dumpio.hpp"
#include "layergeo/types.hpp"

namespace layergeo {

enum class ManifoldKind { linear_subspace, swiss_curve, sphere_patch };

std::string to_string(ManifoldKind kind);
ManifoldKind manifold_from_string(const std::string& name);

/// Geometry of one synthetic layer.
///
/// linear_subspace: k coordinates with variances `spectrum`, rotated into R^D.
/// swiss_curve:     k = 2; the unit square rolled into a spiral sheet in R^3,
///                  scaled by sqrt(spectrum[0]).
/// sphere_patch:    a cap of half-angle pi/3 on the k-sphere in R^(k+1) with
///                  radius sqrt(spectrum[0]).
/// Every chart is embedded by a seeded orthonormal map and perturbed by
/// isotropic ambient Gaussian noise with standard deviation
/// `off_manifold_noise`.
struct SynthLayerSpec {
  std::size_t ambient_dim = 16;
  std::size_t intrinsic_k = 2;
  std::vector<double> spectrum{1.0, 1.0};
  ManifoldKind manifold = ManifoldKind::linear_subspace;
  double off_manifold_noise = 0.0;
  std::uint64_t embed_rotation_seed = 0;
  std::size_t n_points = 1000;  // gen_manifold only; pseudo-dumps use n_seqs * seq_len
  /// Correlation between this layer's latent and the embedding latent in a
  /// pseudo-dump; 0 makes the layer unpredictable from the embedding.
  double condition_coupling = 1.0;

  void validate() const;
  /// Dimension of the chart's image before embedding into R^D.
  std::size_t chart_dim() const;
  /// Number of standard-normal latent coordinates the chart consumes.
  std::size_t latent_dim() const;
};

/// Maps a standard-normal latent vector to chart coordinates (length chart_dim()).
Vector chart_point(const SynthLayerSpec& spec, std::span<const double> latent);

/// n samples of N(mean, cov); cov must be PSD (it may be singular).
RowMatrix gen_gaussian(std::size_t n, const Vector& mean, const Matrix& cov, std::uint64_t seed);

struct ManifoldSample {
  RowMatrix points;     // embedded chart points plus ambient noise
  RowMatrix on_manifold;  // the same points before noise (the projection onto the manifold)
};

ManifoldSample gen_manifold(const SynthLayerSpec& spec, std::uint64_t seed);

struct PseudoDumpConfig {
  std::size_t n_seqs = 512;
  std::size_t seq_len = 8;
  std::uint64_t seed = 0;
  DType dtype = DType::f32;
  /// Share of per-token latent variance not explained by the sequence latent.
  double token_jitter = 0.25;
  double embedding_noise = 0.01;
  std::string model_name = "synthetic";
};

/// Writes manifest.json, one shard per layer (embedding as -1) and mask.bin
/// into `dir`. The embedding holds a rotated copy of each token's latent;
/// layer l is a seeded chart of that latent (mixed with an independent
/// latent by `condition_coupling`) plus layer-specific noise.
DumpManifest gen_pseudo_dump(std::span<const SynthLayerSpec> layers, const PseudoDumpConfig& cfg, const fs::path& dir);

}  // namespace layergeo
