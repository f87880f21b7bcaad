#include <omp.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

#include "layergeo/kernels.hpp"
#include "layergeo/spectral.hpp"

namespace layergeo::kernels {

namespace {
int g_threads = 0;

int active_threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

// Median with the same interpolation rule as layergeo::median, via selection.
double select_median(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = (n - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double lo = v[mid];
  if (n % 2 == 1) return lo;
  const double hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(mid) + 1, v.end());
  return lo + 0.5 * (hi - lo);
}
}  // namespace

void set_thread_count(int threads) { g_threads = std::max(0, threads); }
int thread_count() { return active_threads(); }

namespace omp {

std::vector<double> knn_curvature(const RowMatrix& x, std::span<const std::size_t> anchors, std::size_t k,
                                  double ridge) {
  const auto m = static_cast<std::size_t>(x.rows());
  const auto dim = x.cols();
  if (k < 1 || k >= m) throw std::invalid_argument("knn_curvature: need 1 <= k < number of points");
  std::vector<double> scores(anchors.size());
  const auto n_anchors = static_cast<std::ptrdiff_t>(anchors.size());

#pragma omp parallel num_threads(active_threads())
  {
    std::vector<std::pair<double, std::size_t>> dist(m - 1);
    RowMatrix nb(static_cast<Eigen::Index>(k), dim);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ai = 0; ai < n_anchors; ++ai) {
      const std::size_t a = anchors[static_cast<std::size_t>(ai)];
      const auto anchor = x.row(static_cast<Eigen::Index>(a));
      std::size_t w = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == a) continue;
        dist[w++] = {(x.row(static_cast<Eigen::Index>(j)) - anchor).squaredNorm(), j};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      for (std::size_t r = 0; r < k; ++r) nb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(dist[r].second));
      const RowMatrix centered = nb.rowwise() - nb.colwise().mean();
      // Cov and the k x k Gram matrix share their nonzero spectrum.
      double top;
      if (static_cast<Eigen::Index>(k) < dim) {
        const Matrix gram = centered * centered.transpose() / static_cast<double>(k);
        top = largest_eigenvalue(gram);
      } else {
        const Matrix cov = centered.transpose() * centered / static_cast<double>(k);
        top = largest_eigenvalue(cov);
      }
      scores[static_cast<std::size_t>(ai)] = 1.0 / (std::max(top, 0.0) + ridge);
    }
  }
  return scores;
}

std::vector<double> pair_quotients(const RowMatrix& x, const Matrix& sigma, std::span<const IndexPair> pairs) {
  const RowMatrix white = Precision(sigma).whiten(x);
  std::vector<double> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static) num_threads(active_threads())
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto& p = pairs[static_cast<std::size_t>(t)];
    const double n2 = (x.row(p.i) - x.row(p.j)).squaredNorm();
    out[static_cast<std::size_t>(t)] = std::sqrt(n2) < kCoincidentPairTol
                                           ? std::numeric_limits<double>::quiet_NaN()
                                           : (white.row(p.i) - white.row(p.j)).squaredNorm() / n2;
  }
  return out;
}

std::vector<double> bootstrap_medians(std::span<const double> values, std::size_t resamples, std::uint64_t seed,
                                      Stream stream) {
  if (values.empty()) throw std::invalid_argument("bootstrap of empty sample");
  std::vector<double> out(resamples);
  const auto n = static_cast<std::ptrdiff_t>(resamples);
#pragma omp parallel num_threads(active_threads())
  {
    std::vector<double> draw(values.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      Engine engine = make_engine(seed, stream, static_cast<std::uint64_t>(r));
      std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
      for (double& v : draw) v = values[pick(engine)];
      out[static_cast<std::size_t>(r)] = select_median(draw);
    }
  }
  return out;
}

EnsembleRecord langevin_ensemble(const EnsembleSpec& spec) {
  const std::size_t copies = spec.initial.size();
  if (copies == 0 || spec.drifts.size() != copies) throw std::invalid_argument("langevin: copies/drifts mismatch");
  const auto n = static_cast<std::ptrdiff_t>(spec.initial[0].rows());
  const auto dim = static_cast<std::size_t>(spec.initial[0].cols());
  const std::size_t last = spec.record_steps.empty() ? 0 : spec.record_steps.back();
  const double noise_scale = std::sqrt(2.0 * spec.dt);
  const std::size_t draws = spec.shared_noise ? dim : copies * dim;

  EnsembleRecord rec;
  rec.snapshots.assign(spec.record_steps.size(), std::vector<RowMatrix>(copies, RowMatrix(n, dim)));
  std::vector<std::size_t> blown_at(static_cast<std::size_t>(n), 0);

#pragma omp parallel num_threads(active_threads())
  {
    std::vector<double> state(copies * dim), drift(dim), xi(draws);
#pragma omp for schedule(static)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
      for (std::size_t c = 0; c < copies; ++c) {
        for (std::size_t d = 0; d < dim; ++d) state[c * dim + d] = spec.initial[c](p, static_cast<Eigen::Index>(d));
      }
      Engine engine = make_engine(spec.seed, Stream::particles, static_cast<std::uint64_t>(p));
      std::normal_distribution<double> normal;
      std::size_t next = 0;
      for (std::size_t step = 0;; ++step) {
        while (next < spec.record_steps.size() && spec.record_steps[next] == step) {
          for (std::size_t c = 0; c < copies; ++c) {
            for (std::size_t d = 0; d < dim; ++d) rec.snapshots[next][c](p, static_cast<Eigen::Index>(d)) = state[c * dim + d];
          }
          ++next;
        }
        if (step == last) break;
        for (std::size_t i = 0; i < draws; ++i) xi[i] = normal(engine);
        bool blown = false;
        for (std::size_t c = 0; c < copies; ++c) {
          double* xs = state.data() + c * dim;
          const double* noise = xi.data() + (spec.shared_noise ? 0 : c * dim);
          spec.drifts[c](xs, drift.data());
          for (std::size_t d = 0; d < dim; ++d) {
            xs[d] += drift[d] * spec.dt + noise_scale * noise[d];
            if (!(std::abs(xs[d]) <= spec.divergence_threshold)) blown = true;
          }
        }
        if (blown) {
          blown_at[static_cast<std::size_t>(p)] = step + 1;
          break;
        }
      }
    }
  }
  for (std::size_t s : blown_at) {
    if (s != 0 && (!rec.diverged || s < rec.diverged_step)) {
      rec.diverged = true;
      rec.diverged_step = s;
    }
  }
  return rec;
}

}  // namespace omp
}  // namespace layergeo::kernels
