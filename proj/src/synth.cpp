#include "layergeo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "layergeo/extract.hpp"
#include "layergeo/rng.hpp"
#include "layergeo/spectral.hpp"

namespace layergeo {

namespace {

constexpr double kCapHalfAngle = std::numbers::pi / 3.0;
constexpr double kPaddingValue = 100.0;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::linear_subspace: return "linear_subspace";
    case ManifoldKind::swiss_curve: return "swiss_curve";
    case ManifoldKind::sphere_patch: return "sphere_patch";
  }
  throw std::invalid_argument("unknown manifold kind");
}

ManifoldKind manifold_from_string(const std::string& name) {
  if (name == "linear_subspace") return ManifoldKind::linear_subspace;
  if (name == "swiss_curve") return ManifoldKind::swiss_curve;
  if (name == "sphere_patch") return ManifoldKind::sphere_patch;
  throw std::invalid_argument("unknown manifold kind: " + name);
}

void SynthLayerSpec::validate() const {
  if (intrinsic_k < 1) throw std::invalid_argument("intrinsic_k must be at least 1");
  if (intrinsic_k > ambient_dim) throw std::invalid_argument("intrinsic_k exceeds ambient dimension");
  if (chart_dim() > ambient_dim) throw std::invalid_argument("chart does not fit in the ambient dimension");
  if (manifold == ManifoldKind::swiss_curve && intrinsic_k != 2) {
    throw std::invalid_argument("swiss_curve has intrinsic dimension 2");
  }
  const std::size_t need = manifold == ManifoldKind::linear_subspace ? intrinsic_k : 1;
  if (spectrum.size() < need) throw std::invalid_argument("spectrum has fewer entries than required");
  for (double s : spectrum) {
    if (!(s > 0.0)) throw std::invalid_argument("spectrum entries must be positive");
  }
  if (!(off_manifold_noise >= 0.0)) throw std::invalid_argument("off_manifold_noise must be non-negative");
  if (!(condition_coupling >= 0.0 && condition_coupling <= 1.0)) {
    throw std::invalid_argument("condition_coupling must lie in [0, 1]");
  }
}

std::size_t SynthLayerSpec::chart_dim() const {
  switch (manifold) {
    case ManifoldKind::linear_subspace: return intrinsic_k;
    case ManifoldKind::swiss_curve: return 3;
    case ManifoldKind::sphere_patch: return intrinsic_k + 1;
  }
  return intrinsic_k;
}

std::size_t SynthLayerSpec::latent_dim() const {
  switch (manifold) {
    case ManifoldKind::linear_subspace: return intrinsic_k;
    case ManifoldKind::swiss_curve: return 2;
    case ManifoldKind::sphere_patch: return intrinsic_k + 1;
  }
  return intrinsic_k;
}

Vector chart_point(const SynthLayerSpec& spec, std::span<const double> latent) {
  if (latent.size() < spec.latent_dim()) throw std::invalid_argument("chart_point: latent too short");
  Vector c(static_cast<Eigen::Index>(spec.chart_dim()));
  switch (spec.manifold) {
    case ManifoldKind::linear_subspace:
      for (std::size_t j = 0; j < spec.intrinsic_k; ++j) c(static_cast<Eigen::Index>(j)) = std::sqrt(spec.spectrum[j]) * latent[j];
      break;
    case ManifoldKind::swiss_curve: {
      const double u = normal_cdf(latent[0]);
      const double v = normal_cdf(latent[1]);
      const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * u);
      const double scale = std::sqrt(spec.spectrum[0]) / 10.0;
      c << scale * t * std::cos(t), scale * 10.0 * v, scale * t * std::sin(t);
      break;
    }
    case ManifoldKind::sphere_patch: {
      const std::size_t k = spec.intrinsic_k;
      const double u = normal_cdf(latent[0]);
      // cos(theta) uniform on [cos(max), 1]: uniform area on the 2-sphere cap.
      const double theta = std::acos(1.0 - u * (1.0 - std::cos(kCapHalfAngle)));
      Vector dir(static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < k; ++j) dir(static_cast<Eigen::Index>(j)) = latent[j + 1];
      const double n = dir.norm();
      if (n > 0.0) {
        dir /= n;
      } else {
        dir.setZero();
        dir(0) = 1.0;
      }
      const double r = std::sqrt(spec.spectrum[0]);
      c.head(static_cast<Eigen::Index>(k)) = r * std::sin(theta) * dir;
      c(static_cast<Eigen::Index>(k)) = r * std::cos(theta);
      break;
    }
  }
  return c;
}

RowMatrix gen_gaussian(std::size_t n, const Vector& mean, const Matrix& cov, std::uint64_t seed) {
  const Eigen::Index d = mean.size();
  if (cov.rows() != d || cov.cols() != d) throw std::invalid_argument("gen_gaussian: covariance shape mismatch");
  const SymmetricEigen eig = eig_sym(cov);
  const double scale = std::max(1.0, std::abs(eig.values(0)));
  if (eig.values(d - 1) < -1e-10 * scale) throw std::invalid_argument("gen_gaussian: covariance is not PSD");
  const Matrix factor = eig.vectors * eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  Engine engine = make_engine(seed, Stream::synth);
  std::normal_distribution<double> normal;
  RowMatrix out(static_cast<Eigen::Index>(n), d);
  Vector z(d);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(engine);
    out.row(i) = (mean + factor * z).transpose();
  }
  return out;
}

ManifoldSample gen_manifold(const SynthLayerSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Matrix basis = projection_basis(spec.ambient_dim, spec.chart_dim(), spec.embed_rotation_seed);
  Engine engine = make_engine(seed, Stream::synth);
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(spec.n_points);
  const auto d = static_cast<Eigen::Index>(spec.ambient_dim);
  ManifoldSample out{RowMatrix(n, d), RowMatrix(n, d)};
  std::vector<double> latent(spec.latent_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (double& z : latent) z = normal(engine);
    out.on_manifold.row(i) = (basis * chart_point(spec, latent)).transpose();
    for (Eigen::Index j = 0; j < d; ++j) out.points(i, j) = out.on_manifold(i, j) + spec.off_manifold_noise * normal(engine);
  }
  return out;
}

DumpManifest gen_pseudo_dump(std::span<const SynthLayerSpec> layers, const PseudoDumpConfig& cfg, const fs::path& dir) {
  if (layers.empty()) throw std::invalid_argument("gen_pseudo_dump: no layer specs");
  if (cfg.n_seqs == 0 || cfg.seq_len == 0) throw std::invalid_argument("gen_pseudo_dump: empty dump shape");
  if (!(cfg.token_jitter >= 0.0 && cfg.token_jitter <= 1.0)) throw std::invalid_argument("token_jitter must lie in [0, 1]");
  const std::size_t dim = layers[0].ambient_dim;
  std::size_t latent = 0;
  for (const auto& spec : layers) {
    spec.validate();
    if (spec.ambient_dim != dim) throw std::invalid_argument("gen_pseudo_dump: all layers must share ambient_dim");
    latent = std::max(latent, spec.latent_dim());
  }
  if (latent > dim) throw std::invalid_argument("gen_pseudo_dump: latent dimension exceeds ambient dimension");

  const std::size_t n = cfg.n_seqs, s = cfg.seq_len;
  Engine engine = make_engine(cfg.seed, Stream::synth);
  std::normal_distribution<double> normal;

  Mask mask(n, s, 0);
  std::uniform_int_distribution<std::size_t> length((s + 1) / 2, s);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = length(engine);
    for (std::size_t t = 0; t < len; ++t) mask.at(i, t) = 1;
  }

  // Token latents: sequence latent plus token jitter, unit variance marginally.
  const double keep = std::sqrt(1.0 - cfg.token_jitter * cfg.token_jitter);
  std::vector<double> z(n * s * latent);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> seq(latent);
    for (double& v : seq) v = normal(engine);
    for (std::size_t t = 0; t < s; ++t) {
      for (std::size_t j = 0; j < latent; ++j) z[(i * s + t) * latent + j] = keep * seq[j] + cfg.token_jitter * normal(engine);
    }
  }

  DumpManifest manifest;
  manifest.model_name = cfg.model_name;
  manifest.num_layers = layers.size();
  manifest.hidden_dim = dim;
  manifest.seq_len = s;
  manifest.dtype = cfg.dtype;
  manifest.mask_path = "mask.bin";
  manifest.tokenizer_note = "synthetic pseudo-dump";
  manifest.base_dir = dir;
  fs::create_directories(dir);

  auto write_layer = [&](int index, const Tensor3& tensor) {
    const std::string name = index < 0 ? "layer_emb.bin" : "layer_" + std::to_string(index) + ".bin";
    write_shard(tensor, cfg.dtype, dir / name);
    manifest.shards.push_back({index, name, n});
  };

  {
    const Matrix basis = projection_basis(dim, latent, derive_seed(cfg.seed, Stream::synth, 0));
    Tensor3 emb(n, s, dim);
    Vector zt(static_cast<Eigen::Index>(latent));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < s; ++t) {
        for (std::size_t j = 0; j < latent; ++j) zt(static_cast<Eigen::Index>(j)) = z[(i * s + t) * latent + j];
        const Vector e = basis * zt;
        for (std::size_t k = 0; k < dim; ++k) {
          emb.at(i, t, k) = mask.at(i, t) ? e(static_cast<Eigen::Index>(k)) + cfg.embedding_noise * normal(engine) : kPaddingValue;
        }
      }
    }
    write_layer(-1, emb);
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const SynthLayerSpec& spec = layers[l];
    const Matrix basis = projection_basis(dim, spec.chart_dim(), spec.embed_rotation_seed);
    Engine layer_engine = make_engine(derive_seed(cfg.seed, Stream::synth, l + 1), Stream::synth);
    const double c = spec.condition_coupling;
    const double indep = std::sqrt(1.0 - c * c);
    Tensor3 acts(n, s, dim);
    std::vector<double> zl(latent);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < s; ++t) {
        for (std::size_t j = 0; j < latent; ++j) zl[j] = c * z[(i * s + t) * latent + j] + indep * normal(layer_engine);
        const Vector h = basis * chart_point(spec, zl);
        for (std::size_t k = 0; k < dim; ++k) {
          acts.at(i, t, k) = mask.at(i, t) ? h(static_cast<Eigen::Index>(k)) + spec.off_manifold_noise * normal(layer_engine)
                                           : kPaddingValue;
        }
      }
    }
    write_layer(static_cast<int>(l), acts);
  }

  write_mask(mask, dir / "mask.bin");
  save_manifest(manifest, dir / "manifest.json");
  validate_manifest(manifest);
  return manifest;
}

}  // namespace layergeo
