// Serial reference against OpenMP kernels on identical inputs. Thread count
// is the second benchmark argument for the omp variants.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "layergeo/kernels.hpp"
#include "layergeo/spectral.hpp"

using namespace layergeo;
namespace k = layergeo::kernels;

namespace {

RowMatrix points(Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = normal(rng);
  }
  return x;
}

std::vector<std::size_t> anchors(std::size_t n, std::size_t count) {
  std::vector<std::size_t> a(count);
  for (std::size_t i = 0; i < count; ++i) a[i] = (i * 7919) % n;
  return a;
}

std::vector<k::IndexPair> pairs(std::size_t n, std::size_t count) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  std::vector<k::IndexPair> p(count);
  for (auto& q : p) q = {pick(rng), pick(rng)};
  return p;
}

k::EnsembleSpec ensemble(std::size_t particles) {
  k::EnsembleSpec spec;
  spec.initial = {RowMatrix::Constant(static_cast<Eigen::Index>(particles), 2, 3.0)};
  spec.drifts = {[](const double* x, double* out) {
    out[0] = -2.0 * x[0];
    out[1] = -2.0 * x[1];
  }};
  spec.dt = 1e-3;
  spec.record_steps = {200};
  spec.seed = 3;
  return spec;
}

void set_threads(const benchmark::State& state) { k::set_thread_count(static_cast<int>(state.range(1))); }

void BM_knn_serial(benchmark::State& state) {
  const RowMatrix x = points(state.range(0), 32);
  const auto a = anchors(static_cast<std::size_t>(x.rows()), 64);
  for (auto _ : state) benchmark::DoNotOptimize(k::serial::knn_curvature(x, a, 32, 1e-3));
}

void BM_knn_omp(benchmark::State& state) {
  set_threads(state);
  const RowMatrix x = points(state.range(0), 32);
  const auto a = anchors(static_cast<std::size_t>(x.rows()), 64);
  for (auto _ : state) benchmark::DoNotOptimize(k::omp::knn_curvature(x, a, 32, 1e-3));
}

void BM_quotients_serial(benchmark::State& state) {
  const RowMatrix x = points(4000, 64);
  const Matrix sigma = covariance(x, 1e-3).sigma;
  const auto p = pairs(4000, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(k::serial::pair_quotients(x, sigma, p));
}

void BM_quotients_omp(benchmark::State& state) {
  set_threads(state);
  const RowMatrix x = points(4000, 64);
  const Matrix sigma = covariance(x, 1e-3).sigma;
  const auto p = pairs(4000, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(k::omp::pair_quotients(x, sigma, p));
}

std::vector<double> bootstrap_values() {
  std::vector<double> v(20000);
  std::iota(v.begin(), v.end(), 0.0);
  return v;
}

void BM_bootstrap_serial(benchmark::State& state) {
  const auto v = bootstrap_values();
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::serial::bootstrap_medians(v, static_cast<std::size_t>(state.range(0)), 1, Stream::bootstrap_curv));
  }
}

void BM_bootstrap_omp(benchmark::State& state) {
  set_threads(state);
  const auto v = bootstrap_values();
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::omp::bootstrap_medians(v, static_cast<std::size_t>(state.range(0)), 1, Stream::bootstrap_curv));
  }
}

void BM_langevin_serial(benchmark::State& state) {
  const auto spec = ensemble(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(k::serial::langevin_ensemble(spec));
}

void BM_langevin_omp(benchmark::State& state) {
  set_threads(state);
  const auto spec = ensemble(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(k::omp::langevin_ensemble(spec));
}

void thread_sweep(benchmark::internal::Benchmark* b, std::int64_t size) {
  for (int t : {1, 2, 4, 8}) b->Args({size, t});
}

}  // namespace

BENCHMARK(BM_knn_serial)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn_omp)->Apply([](auto* b) { thread_sweep(b, 4000); })->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_quotients_serial)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_quotients_omp)->Apply([](auto* b) { thread_sweep(b, 200000); })->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_bootstrap_serial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap_omp)->Apply([](auto* b) { thread_sweep(b, 200); })->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_langevin_serial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_langevin_omp)->Apply([](auto* b) { thread_sweep(b, 20000); })->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
