#include <doctest.h>

#include <cmath>

#include "layergeo/dumpio.hpp"
#include "layergeo/spectral.hpp"
#include "layergeo/synth.hpp"
#include "test_util.hpp"

using namespace layergeo;

namespace {

double k_eff(const RowMatrix& x) { return effective_rank(covariance(x, 0.0).sigma); }

SynthLayerSpec linear(std::size_t d, std::size_t k, double eta, std::size_t n) {
  SynthLayerSpec s;
  s.ambient_dim = d;
  s.intrinsic_k = k;
  s.spectrum.assign(k, 1.0);
  s.off_manifold_noise = eta;
  s.n_points = n;
  s.embed_rotation_seed = 11;
  return s;
}

}  // namespace

TEST_CASE("gaussian samples match their moments") {
  const RowMatrix x = gen_gaussian(100000, Vector::Zero(2), Matrix::Identity(2, 2), 1);
  const Matrix c = covariance(x, 0.0).sigma;
  CHECK((c - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);

  const Vector mu = Eigen::Vector3d(1, -2, 0.5);
  const RowMatrix same = gen_gaussian(10, mu, Matrix::Zero(3, 3), 2);
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(same.row(i) == mu.transpose());

  const RowMatrix d = gen_gaussian(100000, Vector::Zero(2), Vector(Eigen::Vector2d(4, 1)).asDiagonal(), 3);
  CHECK(std::abs(k_eff(d) - 1.25) < 0.03);

  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS(gen_gaussian(5, Vector::Zero(2), bad, 1));
  CHECK_THROWS(gen_gaussian(5, Vector::Zero(3), Matrix::Identity(2, 2), 1));
  CHECK(gen_gaussian(50, mu, Matrix::Identity(3, 3), 9) == gen_gaussian(50, mu, Matrix::Identity(3, 3), 9));
}

TEST_CASE("linear subspaces recover their intrinsic dimension") {
  const ManifoldSample s = gen_manifold(linear(16, 3, 0.0, 100000), 4);
  CHECK(std::abs(k_eff(s.points) - 3.0) < 0.05);
  CHECK(s.points == s.on_manifold);
  // Rank is exactly three: the fourth eigenvalue is round-off.
  const SymmetricEigen e = eig_sym(covariance(s.points, 0.0).sigma);
  CHECK(e.values(3) < 1e-12 * e.values(0));
}

TEST_CASE("ambient noise raises effective rank by at most the noise share") {
  const std::size_t d = 64;
  const double eta = 0.1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ManifoldSample s = gen_manifold(linear(d, 3, eta, 20000), seed);
    const Matrix sigma = covariance(s.points, 0.0).sigma;
    const double lmax = eig_sym(sigma).values(0);
    CHECK(k_eff(s.points) <= 3.0 + static_cast<double>(d) * eta * eta / lmax * 1.1);
    CHECK(k_eff(s.points) > 3.0);
  }
}

TEST_CASE("curved manifolds") {
  SynthLayerSpec sphere;
  sphere.ambient_dim = 16;
  sphere.intrinsic_k = 2;
  sphere.spectrum = {1.0};
  sphere.manifold = ManifoldKind::sphere_patch;
  sphere.n_points = 20000;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    sphere.embed_rotation_seed = seed;
    const ManifoldSample s = gen_manifold(sphere, seed);
    const double k = k_eff(s.points);
    CHECK(k >= 2.0);
    CHECK(k <= 3.5);
    // Every point lies on the sphere of radius sqrt(spectrum[0]).
    CHECK(std::abs(s.points.rowwise().norm().maxCoeff() - 1.0) < 1e-12);
  }

  SynthLayerSpec roll = sphere;
  roll.manifold = ManifoldKind::swiss_curve;
  const ManifoldSample r = gen_manifold(roll, 1);
  CHECK(r.points.allFinite());
  CHECK(k_eff(r.points) >= 1.0);
  CHECK(k_eff(r.points) <= 3.0);
  roll.intrinsic_k = 3;
  CHECK_THROWS(roll.validate());
}

TEST_CASE("spec validation") {
  SynthLayerSpec s = linear(4, 5, 0.0, 10);
  CHECK_THROWS(s.validate());
  s = linear(4, 2, -0.1, 10);
  CHECK_THROWS(s.validate());
  s = linear(4, 2, 0.0, 10);
  s.spectrum = {1.0, 0.0};
  CHECK_THROWS(s.validate());
  s = linear(4, 2, 0.0, 10);
  s.spectrum = {1.0};
  CHECK_THROWS(s.validate());
  s = linear(4, 4, 0.0, 10);
  s.manifold = ManifoldKind::sphere_patch;
  CHECK_THROWS(s.validate());
  CHECK(manifold_from_string("swiss_curve") == ManifoldKind::swiss_curve);
  CHECK_THROWS(manifold_from_string("torus"));
}

TEST_CASE("manifold decomposition bound holds pointwise") {
  // tr Cov(X) <= 2 tr Cov(P X) + 2 E|X - P X|^2 with P X the clean point.
  for (double eta : {0.0, 0.05, 0.1}) {
    SynthLayerSpec s = linear(12, 2, eta, 3000);
    s.manifold = ManifoldKind::sphere_patch;
    s.spectrum = {2.0};
    const ManifoldSample m = gen_manifold(s, 5);
    const double lhs = covariance(m.points, 0.0).sigma.trace();
    const double clean = covariance(m.on_manifold, 0.0).sigma.trace();
    const double off = (m.points - m.on_manifold).rowwise().squaredNorm().mean();
    CHECK(lhs <= 2.0 * clean + 2.0 * off + 1e-12);
  }
}

TEST_CASE("pseudo-dumps are valid, deterministic and honour the mask") {
  testutil::TempDir a("synth"), b("synth");
  std::vector<SynthLayerSpec> specs{linear(8, 2, 0.0, 0), linear(8, 3, 0.2, 0)};
  specs[1].condition_coupling = 0.0;
  PseudoDumpConfig cfg;
  cfg.n_seqs = 200;
  cfg.seq_len = 6;
  cfg.seed = 7;
  const DumpManifest m = gen_pseudo_dump(specs, cfg, a.path());
  gen_pseudo_dump(specs, cfg, b.path());
  for (const char* f : {"manifest.json", "mask.bin", "layer_emb.bin", "layer_0.bin", "layer_1.bin"}) {
    CHECK(testutil::slurp(a / f) == testutil::slurp(b / f));
  }
  CHECK_NOTHROW(validate_manifest(load_manifest(a.path())));
  CHECK(m.layers() == std::vector<int>{-1, 0, 1});

  const Mask mask = load_mask(m);
  const Tensor3 l0 = load_layer(m, 0);
  std::size_t padded = 0;
  for (std::size_t i = 0; i < cfg.n_seqs; ++i) {
    CHECK(mask.valid_count(i) >= 3);
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
      if (!mask.at(i, t)) {
        ++padded;
        CHECK(l0.at(i, t, 0) == 100.0);
      }
    }
  }
  CHECK(padded > 0);

  std::vector<SynthLayerSpec> mixed{linear(8, 2, 0.0, 0), linear(6, 2, 0.0, 0)};
  testutil::TempDir c("synth");
  CHECK_THROWS(gen_pseudo_dump(mixed, cfg, c.path()));
}

TEST_CASE("coupling controls predictability from the embedding") {
  testutil::TempDir dir("synth");
  std::vector<SynthLayerSpec> specs{linear(6, 2, 0.0, 0), linear(6, 2, 0.0, 0)};
  specs[1].condition_coupling = 0.0;
  PseudoDumpConfig cfg;
  cfg.n_seqs = 400;
  cfg.seq_len = 4;
  const DumpManifest m = gen_pseudo_dump(specs, cfg, dir.path());
  const Mask mask = load_mask(m);
  const Tensor3 emb = load_layer(m, -1);
  // Least-squares fit of each layer from the embedding: the coupled layer is
  // linear in the latent, so its residual is tiny; the uncoupled one is not.
  for (int layer : {0, 1}) {
    const Tensor3 x = load_layer(m, layer);
    Matrix a, y;
    std::vector<std::vector<double>> ar, yr;
    for (std::size_t i = 0; i < cfg.n_seqs; ++i) {
      for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        if (!mask.at(i, t)) continue;
        std::vector<double> row(emb.token(i, t), emb.token(i, t) + 6);
        row.push_back(1.0);
        ar.push_back(row);
        yr.emplace_back(x.token(i, t), x.token(i, t) + 6);
      }
    }
    a.resize(static_cast<Eigen::Index>(ar.size()), 7);
    y.resize(static_cast<Eigen::Index>(yr.size()), 6);
    for (std::size_t r = 0; r < ar.size(); ++r) {
      for (Eigen::Index j = 0; j < 7; ++j) a(static_cast<Eigen::Index>(r), j) = ar[r][static_cast<std::size_t>(j)];
      for (Eigen::Index j = 0; j < 6; ++j) y(static_cast<Eigen::Index>(r), j) = yr[r][static_cast<std::size_t>(j)];
    }
    const Matrix coef = a.colPivHouseholderQr().solve(y);
    const double resid = (a * coef - y).squaredNorm() / y.squaredNorm();
    if (layer == 0) {
      CHECK(resid < 0.01);
    } else {
      CHECK(resid > 0.9);
    }
  }
}
