#include "layergeo/geoproxy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "layergeo/kernels.hpp"
#include "layergeo/rng.hpp"
#include "layergeo/spectral.hpp"
#include "layergeo/stats.hpp"

namespace layergeo {

namespace {

ProxySummary summarize(std::vector<double> values, const ProxyConfig& cfg, Stream stream) {
  ProxySummary s;
  s.count = values.size();
  std::sort(values.begin(), values.end());
  s.median = quantile_sorted(values, 0.5);
  s.q25 = quantile_sorted(values, 0.25);
  s.q75 = quantile_sorted(values, 0.75);
  if (cfg.bootstrap_resamples > 0) {
    const auto reps = kernels::omp::bootstrap_medians(values, cfg.bootstrap_resamples, cfg.seed, stream);
    const Interval ci = percentile_interval(reps, cfg.ci_level);
    // The percentile interval of a median is not guaranteed to cover the
    // point estimate; widen it so that it does.
    s.ci_low = std::min(ci.low, s.median);
    s.ci_high = std::max(ci.high, s.median);
  } else {
    s.ci_low = s.ci_high = s.median;
  }
  return s;
}

}  // namespace

void ProxyConfig::validate() const {
  if (knn_k < 2) throw std::invalid_argument("knn_k must be at least 2");
  if (n_anchors < 1) throw std::invalid_argument("n_anchors must be at least 1");
  if (n_pairs < 1) throw std::invalid_argument("n_pairs must be at least 1");
  if (ridge < 0.0) throw std::invalid_argument("ridge must be non-negative");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw std::invalid_argument("ci_level must lie in (0, 1)");
}

ProxySummary local_curvature(const RowMatrix& x, const ProxyConfig& cfg) {
  cfg.validate();
  const auto m = static_cast<std::size_t>(x.rows());
  if (m <= cfg.knn_k) {
    throw std::invalid_argument("local_curvature: need more points (" + std::to_string(m) + ") than knn_k (" +
                                std::to_string(cfg.knn_k) + ")");
  }
  Engine engine = make_engine(cfg.seed, Stream::anchors);
  const auto anchors = sample_without_replacement(m, std::min(m, cfg.n_anchors), engine);
  auto scores = kernels::omp::knn_curvature(x, anchors, cfg.knn_k, cfg.ridge);
  return summarize(std::move(scores), cfg, Stream::bootstrap_curv);
}

ProxySummary monotonicity(const RowMatrix& x, const ProxyConfig& cfg) {
  cfg.validate();
  const auto m = static_cast<std::size_t>(x.rows());
  if (m < 2) throw std::invalid_argument("monotonicity: need at least two vectors");
  const RidgedCovariance cov = covariance(x, cfg.ridge);

  Engine engine = make_engine(cfg.seed, Stream::pairs);
  std::uniform_int_distribution<std::uint32_t> first(0, static_cast<std::uint32_t>(m - 1));
  std::uniform_int_distribution<std::uint32_t> offset(1, static_cast<std::uint32_t>(m - 1));
  std::vector<kernels::IndexPair> pairs(cfg.n_pairs);
  for (auto& p : pairs) {
    p.i = first(engine);
    p.j = static_cast<std::uint32_t>((p.i + offset(engine)) % m);  // uniform over j != i
  }
  const auto quotients = kernels::omp::pair_quotients(x, cov.sigma, pairs);
  std::vector<double> kept;
  kept.reserve(quotients.size());
  for (double q : quotients) {
    if (!std::isnan(q)) kept.push_back(q);
  }
  if (kept.empty()) throw std::domain_error("monotonicity: every sampled pair was coincident");
  return summarize(std::move(kept), cfg, Stream::bootstrap_mono);
}

RankEstimate effective_rank_layer(const RowMatrix& x, const ProxyConfig& cfg) {
  cfg.validate();
  RankEstimate out;
  out.value = effective_rank(covariance(x, cfg.ridge).sigma);
  if (cfg.bootstrap_resamples == 0) {
    out.ci_low = out.ci_high = out.q25 = out.q50 = out.q75 = out.value;
    return out;
  }
  const auto m = x.rows();
  std::vector<double> reps(cfg.bootstrap_resamples);
  const auto n = static_cast<std::ptrdiff_t>(reps.size());
#pragma omp parallel for schedule(static) num_threads(kernels::thread_count())
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    Engine engine = make_engine(cfg.seed, Stream::bootstrap_rank, static_cast<std::uint64_t>(r));
    std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
    RowMatrix sample(m, x.cols());
    for (Eigen::Index i = 0; i < m; ++i) sample.row(i) = x.row(pick(engine));
    const Matrix sigma = covariance(sample, cfg.ridge).sigma;
    const double top = largest_eigenvalue(sigma);
    reps[static_cast<std::size_t>(r)] = top > 0.0 ? sigma.trace() / top : 1.0;
  }
  const Interval ci = percentile_interval(reps, cfg.ci_level);
  out.ci_low = std::min(ci.low, out.value);
  out.ci_high = std::max(ci.high, out.value);
  std::sort(reps.begin(), reps.end());
  out.q25 = quantile_sorted(reps, 0.25);
  out.q50 = quantile_sorted(reps, 0.5);
  out.q75 = quantile_sorted(reps, 0.75);
  return out;
}

LayerGeometry profile_representation(const RepresentationSet& rep, const ProxyConfig& cfg) {
  LayerGeometry g;
  g.layer = rep.source_layer;
  g.m = static_cast<std::size_t>(rep.x.rows());
  g.d = static_cast<std::size_t>(rep.x.cols());
  g.m_curv = local_curvature(rep.x, cfg);
  g.m_mono = monotonicity(rep.x, cfg);
  g.k_eff = effective_rank_layer(rep.x, cfg);
  return g;
}

std::vector<LayerGeometry> profile_layers(const DumpManifest& dump, const ExtractConfig& extract_cfg,
                                          const ProxyConfig& proxy_cfg) {
  const Mask mask = load_mask(dump);
  std::vector<LayerGeometry> out;
  for (int layer : dump.layers()) {
    const Tensor3 acts = load_layer(dump, layer);
    out.push_back(profile_representation(extract(acts, mask, layer, extract_cfg), proxy_cfg));
  }
  return out;
}

RepeatedGeometry profile_repeated(const RowMatrix& x, int layer, const ProxyConfig& cfg, std::size_t repeats,
                                  std::size_t subsample) {
  const auto m = static_cast<std::size_t>(x.rows());
  if (repeats == 0) throw std::invalid_argument("profile_repeated: repeats must be positive");
  if (subsample < 2 || subsample > m) throw std::invalid_argument("profile_repeated: subsample size out of range");
  std::vector<double> curv, mono, rank;
  ProxyConfig inner = cfg;
  inner.bootstrap_resamples = 0;
  for (std::size_t r = 0; r < repeats; ++r) {
    Engine engine(derive_seed(cfg.seed, Stream::jitter, r));
    const auto rows = sample_without_replacement(m, subsample, engine);
    RowMatrix sub(static_cast<Eigen::Index>(subsample), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    inner.seed = derive_seed(cfg.seed, Stream::jitter, r + repeats);
    curv.push_back(local_curvature(sub, inner).median);
    mono.push_back(monotonicity(sub, inner).median);
    rank.push_back(effective_rank_layer(sub, inner).value);
  }
  RepeatedGeometry out;
  out.layer = layer;
  out.repeats = repeats;
  out.m_curv = {mean(curv), population_std(curv)};
  out.m_mono = {mean(mono), population_std(mono)};
  out.k_eff = {mean(rank), population_std(rank)};
  return out;
}

}  // namespace layergeo
