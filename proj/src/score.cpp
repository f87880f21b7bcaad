#include "layergeo/score.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "layergeo/correlate.hpp"
#include "layergeo/stats.hpp"

namespace layergeo {

void ScorePreset::validate() const {
  if (std::all_of(alpha.begin(), alpha.end(), [](double a) { return a == 0.0; })) {
    throw std::invalid_argument("preset '" + name + "' has all-zero coefficients");
  }
  for (double a : alpha) {
    if (!std::isfinite(a)) throw std::invalid_argument("preset '" + name + "' has a non-finite coefficient");
  }
}

ScorePreset final_preset() { return {"final", {1.0, 1.0, -1.0, 0.0}}; }

const std::vector<ScorePreset>& builtin_presets() {
  static const std::vector<ScorePreset> presets = {
      {"final", {1.0, 1.0, -1.0, 0.0}},
      {"baseline_k2", {1.0, 1.0, -1.0, -0.5}},
      {"curv_x0.5", {0.5, 1.0, -1.0, -0.5}},
      {"curv_x1.5", {1.5, 1.0, -1.0, -0.5}},
      {"mono_x0.5", {1.0, 0.5, -1.0, -0.5}},
      {"mono_x1.5", {1.0, 1.5, -1.0, -0.5}},
      {"k_lin_x0.5", {1.0, 1.0, -0.5, -0.5}},
      {"k_lin_x1.5", {1.0, 1.0, -1.5, -0.5}},
      {"k_sq_x0.5", {1.0, 1.0, -1.0, -0.25}},
      {"k_sq_x2.0", {1.0, 1.0, -1.0, -1.0}},
  };
  return presets;
}

std::optional<ScorePreset> find_builtin_preset(const std::string& name) {
  for (const auto& p : builtin_presets()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

std::vector<double> zscore(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("zscore of empty range");
  const double mu = mean(values);
  const double sd = population_std(values);
  std::vector<double> out(values.size(), 0.0);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mu) / sd;
  return out;
}

LayerStats stats_of(const LayerGeometry& g) { return {g.layer, g.m_curv.median, g.m_mono.median, g.k_eff.value}; }

std::vector<LayerStats> stats_of(std::span<const LayerGeometry> geometry) {
  std::vector<LayerStats> out;
  out.reserve(geometry.size());
  for (const auto& g : geometry) out.push_back(stats_of(g));
  return out;
}

int argmax_layer(std::span<const ScoreRow> rows) {
  if (rows.empty()) throw std::invalid_argument("argmax over no layers");
  const ScoreRow* best = &rows[0];
  for (const auto& r : rows) {
    if (r.score > best->score || (r.score == best->score && r.layer < best->layer)) best = &r;
  }
  return best->layer;
}

ScoreTable selection_score(std::span<const LayerStats> stats, const ScorePreset& preset, std::span<const int> exclude) {
  preset.validate();
  ScoreTable table;
  table.preset = preset;

  std::vector<LayerStats> kept;
  for (const auto& s : stats) {
    if (std::find(exclude.begin(), exclude.end(), s.layer) != exclude.end()) {
      table.excluded_layers.push_back(s.layer);
      continue;
    }
    if (!(s.m_curv > 0.0) || !(s.m_mono > 0.0) || !(s.k_eff > 0.0)) {
      throw std::domain_error("non-positive proxy value for layer " + std::to_string(s.layer));
    }
    kept.push_back(s);
  }
  if (kept.empty()) throw std::invalid_argument("selection_score: no layers left after exclusion");

  std::vector<double> lc, lm, lk, lk2;
  for (const auto& s : kept) {
    lc.push_back(std::log(s.m_curv));
    lm.push_back(std::log(s.m_mono));
    lk.push_back(std::log(s.k_eff));
    lk2.push_back(lk.back() * lk.back());
  }
  const auto zc = zscore(lc), zm = zscore(lm), zk = zscore(lk), zk2 = zscore(lk2);
  const auto& a = preset.alpha;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    ScoreRow row;
    row.layer = kept[i].layer;
    row.z_curv = zc[i];
    row.z_mono = zm[i];
    row.z_k = zk[i];
    row.z_k2 = zk2[i];
    row.score = a[0] * zc[i] + a[1] * zm[i] + a[2] * zk[i] + a[3] * zk2[i];
    row.predicted_loss = -row.score;
    table.rows.push_back(row);
  }
  table.selected_layer = argmax_layer(table.rows);
  return table;
}

std::vector<SensitivityRow> sensitivity_sweep(std::span<const LayerStats> stats, std::span<const ScorePreset> presets,
                                              std::span<const int> exclude,
                                              std::optional<std::span<const LayerLoss>> losses) {
  if (presets.empty()) throw std::invalid_argument("sensitivity_sweep: no presets");
  std::map<int, double> loss_by_layer;
  if (losses) {
    for (const auto& l : *losses) {
      if (!loss_by_layer.emplace(l.layer, l.val_loss).second) {
        throw std::invalid_argument("duplicate loss row for layer " + std::to_string(l.layer));
      }
    }
  }

  std::vector<SensitivityRow> out;
  for (const auto& preset : presets) {
    const ScoreTable table = selection_score(stats, preset, exclude);
    SensitivityRow row;
    row.preset = preset;
    row.selected_layer = table.selected_layer;
    if (losses) {
      std::vector<double> score, neg_loss;
      int oracle = 0;
      double oracle_loss = 0.0;
      bool first = true;
      for (const auto& r : table.rows) {
        const auto it = loss_by_layer.find(r.layer);
        if (it == loss_by_layer.end()) {
          throw std::invalid_argument("loss table has no row for layer " + std::to_string(r.layer));
        }
        score.push_back(r.score);
        neg_loss.push_back(-it->second);
        if (first || it->second < oracle_loss) {
          oracle = r.layer;
          oracle_loss = it->second;
          first = false;
        }
      }
      if (loss_by_layer.size() != table.rows.size() + table.excluded_layers.size()) {
        for (const auto& [layer, loss] : loss_by_layer) {
          const bool scored = std::any_of(table.rows.begin(), table.rows.end(), [&](const ScoreRow& r) { return r.layer == layer; });
          const bool excluded = std::find(table.excluded_layers.begin(), table.excluded_layers.end(), layer) !=
                                table.excluded_layers.end();
          if (!scored && !excluded) {
            throw std::invalid_argument("loss layer " + std::to_string(layer) + " not present in geometry");
          }
        }
      }
      row.selected_loss = loss_by_layer.at(table.selected_layer);
      row.oracle_layer = oracle;
      row.gap = *row.selected_loss - oracle_loss;
      if (score.size() >= 2) {
        try {
          row.spearman = spearman(score, neg_loss);
        } catch (const std::domain_error&) {
          row.spearman.reset();
        }
      }
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace layergeo
