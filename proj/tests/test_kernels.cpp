#include <doctest.h>

#include <cmath>
#include <numeric>

#include "layergeo/kernels.hpp"
#include "layergeo/spectral.hpp"
#include "test_util.hpp"

using namespace layergeo;
namespace k = layergeo::kernels;

namespace {

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<k::IndexPair> some_pairs(std::size_t m, std::size_t count, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<k::IndexPair> out;
  for (std::size_t p = 0; p < count; ++p) {
    const auto i = static_cast<std::uint32_t>(rng() % m);
    auto j = static_cast<std::uint32_t>(rng() % m);
    out.push_back({i, j});
  }
  return out;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) {
      CHECK(std::isnan(a[i]));
      CHECK(std::isnan(b[i]));
    } else {
      CHECK(std::abs(a[i] - b[i]) <= tol * std::max(1.0, std::abs(a[i])));
    }
  }
}

}  // namespace

TEST_CASE("four-point neighbourhood curvature matches the closed form") {
  RowMatrix x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  // Each anchor's three neighbours have covariance with top eigenvalue 2/3.
  const auto anchors = iota_n(4);
  for (const auto& v : {k::serial::knn_curvature(x, anchors, 3, 0.0), k::omp::knn_curvature(x, anchors, 3, 0.0)}) {
    REQUIRE(v.size() == 4);
    for (double s : v) CHECK(s == doctest::Approx(1.5).epsilon(1e-12));
  }
}

TEST_CASE("identical points score one over the ridge") {
  const RowMatrix x = RowMatrix::Constant(20, 3, 2.0);
  const auto anchors = iota_n(20);
  for (double s : k::omp::knn_curvature(x, anchors, 5, 1e-3)) CHECK(s == doctest::Approx(1000.0));
  for (double s : k::serial::knn_curvature(x, anchors, 5, 1e-3)) CHECK(s == doctest::Approx(1000.0));
}

TEST_CASE("serial and parallel curvature agree") {
  for (Eigen::Index d : {3, 12, 40}) {
    const RowMatrix x = testutil::random_matrix(150, d, static_cast<unsigned>(d));
    const auto anchors = iota_n(150);
    check_close(k::serial::knn_curvature(x, anchors, 16, 1e-3), k::omp::knn_curvature(x, anchors, 16, 1e-3), 1e-9);
    check_close(k::serial::knn_curvature(x, anchors, 16, 0.0), k::omp::knn_curvature(x, anchors, 16, 0.0), 1e-9);
  }
}

TEST_CASE("serial and parallel pair quotients agree") {
  RowMatrix x = testutil::random_matrix(80, 7, 3);
  x.row(5) = x.row(6);
  auto pairs = some_pairs(80, 500, 1);
  pairs.push_back({5, 6});
  pairs.push_back({9, 9});
  const Matrix sigma = covariance(x, 1e-3).sigma;
  const auto a = k::serial::pair_quotients(x, sigma, pairs);
  const auto b = k::omp::pair_quotients(x, sigma, pairs);
  check_close(a, b, 1e-10);
  CHECK(std::isnan(a[500]));
  CHECK(std::isnan(a[501]));
  const SymmetricEigen e = eig_sym(sigma);
  for (std::size_t i = 0; i < 500; ++i) {
    if (std::isnan(a[i])) continue;
    CHECK(a[i] <= 1.0 / e.values(6) * (1 + 1e-9));
    CHECK(a[i] >= 1.0 / e.values(0) * (1 - 1e-9));
  }
}

TEST_CASE("bootstrap medians are identical across implementations and thread counts") {
  std::vector<double> v(301);
  std::mt19937 rng(5);
  for (double& x : v) x = std::exponential_distribution<double>(1.0)(rng);
  const auto a = k::serial::bootstrap_medians(v, 64, 3, Stream::bootstrap_mono);
  const auto b = k::omp::bootstrap_medians(v, 64, 3, Stream::bootstrap_mono);
  CHECK(a == b);
  std::vector<double> even(v.begin(), v.end() - 1);
  CHECK(k::serial::bootstrap_medians(even, 10, 1, Stream::bootstrap_curv) ==
        k::omp::bootstrap_medians(even, 10, 1, Stream::bootstrap_curv));
  k::set_thread_count(3);
  CHECK(k::omp::bootstrap_medians(v, 64, 3, Stream::bootstrap_mono) == b);
  k::set_thread_count(0);
}

TEST_CASE("ensemble kernels agree and honour record steps") {
  k::EnsembleSpec spec;
  spec.initial = {testutil::random_matrix(50, 2, 1), testutil::random_matrix(50, 2, 2)};
  const auto drift = [](const double* x, double* out) {
    out[0] = -x[0];
    out[1] = -3.0 * x[1];
  };
  spec.drifts = {drift, drift};
  spec.dt = 0.01;
  spec.record_steps = {0, 10, 100};
  spec.seed = 4;
  const auto a = k::serial::langevin_ensemble(spec);
  const auto b = k::omp::langevin_ensemble(spec);
  CHECK_FALSE(a.diverged);
  REQUIRE(a.snapshots.size() == 3);
  CHECK(a.snapshots[0][0] == spec.initial[0]);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(a.snapshots[r][c] == b.snapshots[r][c]);
  }
  // Shared noise: the gap between coupled copies contracts deterministically.
  const double gap0 = (spec.initial[0] - spec.initial[1]).norm();
  const double gap = (a.snapshots[2][0] - a.snapshots[2][1]).norm();
  CHECK(gap < gap0 * std::pow(0.99, 100) * (1 + 1e-12));

  k::set_thread_count(2);
  CHECK(k::omp::langevin_ensemble(spec).snapshots[2][1] == b.snapshots[2][1]);
  k::set_thread_count(0);
}

TEST_CASE("ensemble divergence is reported at the first blown step") {
  k::EnsembleSpec spec;
  spec.initial = {RowMatrix::Constant(4, 1, 1.0)};
  spec.drifts = {[](const double* x, double* out) { out[0] = 100.0 * x[0]; }};
  spec.dt = 0.5;
  spec.record_steps = {50};
  const auto a = k::serial::langevin_ensemble(spec);
  const auto b = k::omp::langevin_ensemble(spec);
  CHECK(a.diverged);
  CHECK(b.diverged);
  CHECK(a.diverged_step == b.diverged_step);
  CHECK(a.diverged_step > 0);
  CHECK(a.diverged_step < 10);
}
