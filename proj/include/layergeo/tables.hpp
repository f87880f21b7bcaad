#pragma once

// Stable CSV/JSON contracts shared by the CLI subcommands. Column sets and
// JSON keys are listed in schema/formats.json; bump kFormatVersion when
// either changes.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "layergeo/correlate.hpp"
#include "layergeo/geoproxy.hpp"
#include "layergeo/langevin.hpp"
#include "layergeo/score.hpp"
#include "layergeo/synth.hpp"
#include "layergeo/toybridge.hpp"

namespace layergeo {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Shortest text that parses back to the same double; "nan"/"inf" for
/// non-finite values.
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
  bool has_column(const std::string& name) const;
};

CsvTable read_csv(const fs::path& path);
void write_csv(const CsvTable& table, const fs::path& path);
std::string to_csv_text(const CsvTable& table);

void write_json(const Json& j, const fs::path& path);
Json read_json(const fs::path& path);

CsvTable geometry_csv(std::span<const LayerGeometry> geometry);
Json geometry_json(std::span<const LayerGeometry> geometry);
/// Accepts the CSV or JSON geometry contract (chosen by extension). Only
/// the point estimates are required.
std::vector<LayerStats> read_layer_stats(const fs::path& path);

CsvTable score_csv(const ScoreTable& table);
Json score_json(const ScoreTable& table);
ScoreTable score_from_json(const Json& j);
/// JSON selection record, or score CSV (exclusions then unknown).
ScoreTable read_score_table(const fs::path& path);

CsvTable loss_csv(std::span<const LayerLoss> losses);
std::vector<LayerLoss> read_losses(const fs::path& path);

Json correlation_json(const CorrelationReport& report);
/// Fixed-width table with the agreement columns.
std::string correlation_text(const CorrelationReport& report);

CsvTable sensitivity_csv(std::span<const SensitivityRow> rows);
Json sensitivity_json(std::span<const SensitivityRow> rows);
std::vector<ScorePreset> read_presets(const fs::path& path);

SynthLayerSpec layer_spec_from_json(const Json& j);
Json layer_spec_json(const SynthLayerSpec& spec);
PseudoDumpConfig dump_config_from_json(const Json& j, PseudoDumpConfig base = {});
Json dump_config_json(const PseudoDumpConfig& cfg);
BridgeConfig bridge_config_from_json(const Json& j, BridgeConfig base = {});
Json bridge_config_json(const BridgeConfig& cfg);
ProxyConfig proxy_config_from_json(const Json& j, ProxyConfig base = {});
Json proxy_config_json(const ProxyConfig& cfg);
ExtractConfig extract_config_from_json(const Json& j, ExtractConfig base = {});
Json extract_config_json(const ExtractConfig& cfg);

/// {"layers": [...], "dump": {...}, "extract": {...}, "proxy": {...},
///  "bridge": {...}, "preset": name, "exclude_layers": [...]}; every section
/// except "layers" is optional.
struct ExperimentSpec {
  std::vector<SynthLayerSpec> layers;
  ExperimentConfig config;
};
ExperimentSpec experiment_spec_from_json(const Json& j);
ExperimentSpec read_experiment_spec(const fs::path& path);
/// Inverse of experiment_spec_from_json for built-in presets.
Json experiment_spec_json(const ExperimentSpec& spec);

CsvTable sweep_csv(const SweepResult& sweep);
Json sweep_json(const SweepResult& sweep);

Json contraction_json(const ContractionReport& r);
Json perturbation_json(const PerturbationReport& r);
Json monotonicity_json(const MonotonicityReport& r);
Json concentration_json(const ConcentrationReport& r);
CsvTable contraction_curve_csv(const ContractionReport& r);

}  // namespace layergeo
