#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layergeo/geoproxy.hpp"

namespace layergeo {

/// Coefficients on z(log m_curv), z(log m_mono), z(log k) and z((log k)^2).
struct ScorePreset {
  std::string name;
  std::array<double, 4> alpha{};

  void validate() const;
};

/// The fixed linear score (1, 1, -1, 0).
ScorePreset final_preset();

/// The ten coefficient perturbations of the sensitivity study, final first.
const std::vector<ScorePreset>& builtin_presets();

std::optional<ScorePreset> find_builtin_preset(const std::string& name);

/// Layer-wise z-score with population std; all zeros when std < 1e-12.
std::vector<double> zscore(std::span<const double> values);

/// Point estimates consumed by the score.
struct LayerStats {
  int layer = 0;
  double m_curv = 0.0;
  double m_mono = 0.0;
  double k_eff = 0.0;
};

LayerStats stats_of(const LayerGeometry& g);
std::vector<LayerStats> stats_of(std::span<const LayerGeometry> geometry);

struct ScoreRow {
  int layer = 0;
  double score = 0.0;
  double predicted_loss = 0.0;  // -score
  double z_curv = 0.0;
  double z_mono = 0.0;
  double z_k = 0.0;
  double z_k2 = 0.0;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;  // included layers, in input order
  int selected_layer = 0;
  ScorePreset preset;
  std::vector<int> excluded_layers;
};

/// Layers listed in `exclude` are dropped before normalisation. The argmax
/// breaks ties toward the lowest layer index.
ScoreTable selection_score(std::span<const LayerStats> stats, const ScorePreset& preset,
                           std::span<const int> exclude = {});

/// Index of the row with maximal score (ties to the lowest layer index).
int argmax_layer(std::span<const ScoreRow> rows);

struct LayerLoss {
  int layer = 0;
  double val_loss = 0.0;
  std::optional<double> train_loss;
};

struct SensitivityRow {
  ScorePreset preset;
  int selected_layer = 0;
  std::optional<double> selected_loss;
  std::optional<int> oracle_layer;    // argmin validation loss
  std::optional<double> gap;          // loss(selected) - loss(oracle)
  std::optional<double> spearman;     // score vs negative loss; empty if undefined
};

std::vector<SensitivityRow> sensitivity_sweep(std::span<const LayerStats> stats, std::span<const ScorePreset> presets,
                                              std::span<const int> exclude,
                                              std::optional<std::span<const LayerLoss>> losses);

}  // namespace layergeo
