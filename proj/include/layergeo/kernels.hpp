#pragma once

// Data-parallel inner loops. Every kernel exists twice with the same
// signature: `serial::` is the straightforward reference implementation kept
// for testing, `omp::` is the OpenMP version used by the pipeline. Each
// parallel unit owns an RNG stream derived from (seed, unit index), so the
// parallel results do not depend on the thread count or schedule.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "layergeo/rng.hpp"
#include "layergeo/types.hpp"

namespace layergeo::kernels {

struct IndexPair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
};

/// Pairs whose displacement norm falls below this are reported as NaN.
inline constexpr double kCoincidentPairTol = 1e-12;

/// Drift field b(x) of dX = b(X) dt + sqrt(2) dW; writes `dim` values.
using Drift = std::function<void(const double* x, double* out)>;

struct EnsembleSpec {
  std::vector<RowMatrix> initial;  // one [n_particles, dim] block per coupled copy
  std::vector<Drift> drifts;       // one per copy
  double dt = 1e-3;
  std::vector<std::size_t> record_steps;  // ascending step counts to snapshot
  std::uint64_t seed = 0;
  bool shared_noise = true;  // synchronous coupling across copies
  double divergence_threshold = 1e8;
};

struct EnsembleRecord {
  std::vector<std::vector<RowMatrix>> snapshots;  // [record][copy]
  bool diverged = false;
  std::size_t diverged_step = 0;
};

namespace serial {

/// 1 / lambda_max(Cov(kNN(anchor)) + ridge I) per anchor; anchor excluded.
std::vector<double> knn_curvature(const RowMatrix& x, std::span<const std::size_t> anchors, std::size_t k,
                                  double ridge);

/// (xi-xj)ᵀ Σ⁻¹ (xi-xj) / ‖xi-xj‖² per pair; NaN for coincident points.
std::vector<double> pair_quotients(const RowMatrix& x, const Matrix& sigma, std::span<const IndexPair> pairs);

/// Median of each of `resamples` with-replacement resamples of `values`.
std::vector<double> bootstrap_medians(std::span<const double> values, std::size_t resamples, std::uint64_t seed,
                                      Stream stream);

EnsembleRecord langevin_ensemble(const EnsembleSpec& spec);

}  // namespace serial

namespace omp {

std::vector<double> knn_curvature(const RowMatrix& x, std::span<const std::size_t> anchors, std::size_t k,
                                  double ridge);

std::vector<double> pair_quotients(const RowMatrix& x, const Matrix& sigma, std::span<const IndexPair> pairs);

std::vector<double> bootstrap_medians(std::span<const double> values, std::size_t resamples, std::uint64_t seed,
                                      Stream stream);

EnsembleRecord langevin_ensemble(const EnsembleSpec& spec);

}  // namespace omp

/// Worker count used by the omp kernels; 0 restores the runtime default.
void set_thread_count(int threads);
int thread_count();

}  // namespace layergeo::kernels
