#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

#include "layergeo/kernels.hpp"
#include "layergeo/spectral.hpp"
#include "layergeo/stats.hpp"

namespace layergeo::kernels::serial {

std::vector<double> knn_curvature(const RowMatrix& x, std::span<const std::size_t> anchors, std::size_t k,
                                  double ridge) {
  const auto m = static_cast<std::size_t>(x.rows());
  if (k < 1 || k >= m) throw std::invalid_argument("knn_curvature: need 1 <= k < number of points");
  std::vector<double> scores;
  scores.reserve(anchors.size());
  for (std::size_t a : anchors) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == a) continue;
      double d = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double diff = x(static_cast<Eigen::Index>(j), c) - x(static_cast<Eigen::Index>(a), c);
        d += diff * diff;
      }
      dist.emplace_back(d, j);
    }
    std::sort(dist.begin(), dist.end());

    RowMatrix nb(static_cast<Eigen::Index>(k), x.cols());
    for (std::size_t r = 0; r < k; ++r) nb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(dist[r].second));
    const Vector mu = nb.colwise().mean().transpose();
    Matrix cov = Matrix::Zero(x.cols(), x.cols());
    for (Eigen::Index r = 0; r < nb.rows(); ++r) {
      const Vector d = nb.row(r).transpose() - mu;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(k);
    cov.diagonal().array() += ridge;
    scores.push_back(1.0 / eig_sym(cov).values(0));
  }
  return scores;
}

std::vector<double> pair_quotients(const RowMatrix& x, const Matrix& sigma, std::span<const IndexPair> pairs) {
  const Precision precision(sigma);
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Vector d = (x.row(p.i) - x.row(p.j)).transpose();
    const double n2 = d.squaredNorm();
    if (std::sqrt(n2) < kCoincidentPairTol) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out.push_back(d.dot(precision.apply(d)) / n2);
  }
  return out;
}

std::vector<double> bootstrap_medians(std::span<const double> values, std::size_t resamples, std::uint64_t seed,
                                      Stream stream) {
  if (values.empty()) throw std::invalid_argument("bootstrap of empty sample");
  std::vector<double> out;
  out.reserve(resamples);
  std::vector<double> draw(values.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    Engine engine = make_engine(seed, stream, r);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    for (double& v : draw) v = values[pick(engine)];
    out.push_back(median(draw));
  }
  return out;
}

EnsembleRecord langevin_ensemble(const EnsembleSpec& spec) {
  const std::size_t copies = spec.initial.size();
  if (copies == 0 || spec.drifts.size() != copies) throw std::invalid_argument("langevin: copies/drifts mismatch");
  const auto n = static_cast<std::size_t>(spec.initial[0].rows());
  const auto dim = static_cast<std::size_t>(spec.initial[0].cols());
  const std::size_t last = spec.record_steps.empty() ? 0 : spec.record_steps.back();
  const double noise_scale = std::sqrt(2.0 * spec.dt);

  EnsembleRecord rec;
  rec.snapshots.assign(spec.record_steps.size(), std::vector<RowMatrix>(copies, RowMatrix(n, dim)));

  std::vector<double> state(copies * dim), drift(dim), xi(copies * dim);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < copies; ++c) {
      for (std::size_t d = 0; d < dim; ++d) state[c * dim + d] = spec.initial[c](p, d);
    }
    Engine engine = make_engine(spec.seed, Stream::particles, p);
    std::normal_distribution<double> normal;
    std::size_t next = 0;
    bool blown = false;
    for (std::size_t step = 0; !blown; ++step) {
      while (next < spec.record_steps.size() && spec.record_steps[next] == step) {
        for (std::size_t c = 0; c < copies; ++c) {
          for (std::size_t d = 0; d < dim; ++d) rec.snapshots[next][c](p, d) = state[c * dim + d];
        }
        ++next;
      }
      if (step == last) break;
      const std::size_t draws = spec.shared_noise ? dim : copies * dim;
      for (std::size_t i = 0; i < draws; ++i) xi[i] = normal(engine);
      for (std::size_t c = 0; c < copies; ++c) {
        double* x = state.data() + c * dim;
        const double* noise = xi.data() + (spec.shared_noise ? 0 : c * dim);
        spec.drifts[c](x, drift.data());
        for (std::size_t d = 0; d < dim; ++d) x[d] += drift[d] * spec.dt + noise_scale * noise[d];
        for (std::size_t d = 0; d < dim; ++d) {
          if (!(std::abs(x[d]) <= spec.divergence_threshold)) blown = true;
        }
        if (blown) {
          if (!rec.diverged || step + 1 < rec.diverged_step) rec.diverged_step = step + 1;
          rec.diverged = true;
          break;
        }
      }
    }
  }
  return rec;
}

}  // namespace layergeo::kernels::serial
