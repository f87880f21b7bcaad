#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "layergeo/geoproxy.hpp"
#include "layergeo/score.hpp"

namespace layergeo {

/// All three throw std::domain_error when either input has zero variance
/// (or, for Kendall, when every pair is tied in one input).
double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);
/// Tie-corrected Kendall tau-b, O(n log n).
double kendall(std::span<const double> a, std::span<const double> b);

/// 1-based ranks with ties assigned their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct RepeatStats {
  std::size_t count = 0;
  MeanStd spearman;
  MeanStd kendall;
  MeanStd pearson;
};

struct CorrelationReport {
  std::optional<double> spearman;  // empty when undefined (zero variance)
  std::optional<double> kendall;
  std::optional<double> pearson;
  int best_predicted_layer = 0;
  int best_observed_layer = 0;
  std::size_t rank_gap = 0;  // 0-based rank of best_predicted in ascending-loss order
  std::size_t n_layers = 0;
  std::optional<RepeatStats> repeats;
};

/// Correlates score with negative validation loss over the scored layers.
CorrelationReport agreement_report(const ScoreTable& scores, std::span<const LayerLoss> losses,
                                   std::span<const ScoreTable> repeats = {});

}  // namespace layergeo
