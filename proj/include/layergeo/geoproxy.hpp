#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "layergeo/dumpio.hpp"
#include "layergeo/extract.hpp"
#include "layergeo/types.hpp"

namespace layergeo {

struct ProxyConfig {
  std::size_t knn_k = 64;
  std::size_t n_anchors = 512;
  std::size_t n_pairs = 200000;
  double ridge = 1e-3;
  std::size_t bootstrap_resamples = 200;
  double ci_level = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Robust summary of a per-anchor or per-pair score distribution.
struct ProxySummary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double ci_low = 0.0;   // bootstrap percentile interval of the median
  double ci_high = 0.0;
  std::size_t count = 0;  // anchors or retained pairs
};

struct RankEstimate {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double q25 = 0.0;  // bootstrap quantiles
  double q50 = 0.0;
  double q75 = 0.0;
};

struct LayerGeometry {
  int layer = 0;
  ProxySummary m_curv;
  ProxySummary m_mono;
  RankEstimate k_eff;
  std::size_t m = 0;
  std::size_t d = 0;
};

ProxySummary local_curvature(const RowMatrix& x, const ProxyConfig& cfg);
ProxySummary monotonicity(const RowMatrix& x, const ProxyConfig& cfg);
RankEstimate effective_rank_layer(const RowMatrix& x, const ProxyConfig& cfg);

LayerGeometry profile_representation(const RepresentationSet& rep, const ProxyConfig& cfg);

/// One entry per layer in the dump (embedding first as layer -1).
std::vector<LayerGeometry> profile_layers(const DumpManifest& dump, const ExtractConfig& extract_cfg,
                                          const ProxyConfig& proxy_cfg);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct RepeatedGeometry {
  int layer = 0;
  std::size_t repeats = 0;
  MeanStd m_curv;
  MeanStd m_mono;
  MeanStd k_eff;
};

/// Re-estimates the three point proxies on `repeats` seeded row subsamples of
/// size `subsample` (without replacement) and reports mean and population
/// standard deviation across repeats.
RepeatedGeometry profile_repeated(const RowMatrix& x, int layer, const ProxyConfig& cfg, std::size_t repeats,
                                  std::size_t subsample);

}  // namespace layergeo
