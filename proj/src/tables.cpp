#include "layergeo/tables.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "layergeo/dumpio.hpp"

namespace layergeo {

namespace {

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

double parse_double(const std::string& s, const std::string& what) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("cannot parse " + what + " value '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("cannot parse " + what + " value '" + s + "'");
  return v;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_json_path(const fs::path& path) { return path.extension() == ".json"; }

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* known) { return k == known; })) {
      throw std::invalid_argument("unknown key '" + k + "' in " + where);
    }
  }
}

Json summary_json(const ProxySummary& s) {
  return Json{{"median", s.median}, {"q25", s.q25},         {"q75", s.q75},
              {"ci_low", s.ci_low}, {"ci_high", s.ci_high}, {"count", s.count}};
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::invalid_argument("missing CSV column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto fields = split_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw std::invalid_argument(path.string() + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (first) throw std::invalid_argument(path.string() + ": empty CSV");
  return t;
}

std::string to_csv_text(const CsvTable& table) {
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].find_first_of(",\n") != std::string::npos) throw std::invalid_argument("CSV field contains a separator");
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out.str();
}

void write_csv(const CsvTable& table, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv_text(table);
}

void write_json(const Json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

CsvTable geometry_csv(std::span<const LayerGeometry> geometry) {
  CsvTable t;
  t.header = {"layer",          "M",          "D",          "m_curv_median", "m_curv_q25",     "m_curv_q75",
              "m_curv_ci_low",  "m_curv_ci_high", "n_anchors", "m_mono_median", "m_mono_q25",  "m_mono_q75",
              "m_mono_ci_low",  "m_mono_ci_high", "n_pairs",   "k_eff",         "k_eff_ci_low", "k_eff_ci_high",
              "k_eff_q25",      "k_eff_q50",  "k_eff_q75"};
  for (const auto& g : geometry) {
    t.rows.push_back({std::to_string(g.layer), std::to_string(g.m), std::to_string(g.d), format_number(g.m_curv.median),
                      format_number(g.m_curv.q25), format_number(g.m_curv.q75), format_number(g.m_curv.ci_low),
                      format_number(g.m_curv.ci_high), std::to_string(g.m_curv.count), format_number(g.m_mono.median),
                      format_number(g.m_mono.q25), format_number(g.m_mono.q75), format_number(g.m_mono.ci_low),
                      format_number(g.m_mono.ci_high), std::to_string(g.m_mono.count), format_number(g.k_eff.value),
                      format_number(g.k_eff.ci_low), format_number(g.k_eff.ci_high), format_number(g.k_eff.q25),
                      format_number(g.k_eff.q50), format_number(g.k_eff.q75)});
  }
  return t;
}

Json geometry_json(std::span<const LayerGeometry> geometry) {
  Json layers = Json::array();
  for (const auto& g : geometry) {
    layers.push_back(Json{{"layer", g.layer},
                          {"M", g.m},
                          {"D", g.d},
                          {"m_curv", summary_json(g.m_curv)},
                          {"m_mono", summary_json(g.m_mono)},
                          {"k_eff", Json{{"value", g.k_eff.value},
                                         {"ci_low", g.k_eff.ci_low},
                                         {"ci_high", g.k_eff.ci_high},
                                         {"q25", g.k_eff.q25},
                                         {"q50", g.k_eff.q50},
                                         {"q75", g.k_eff.q75}}}});
  }
  return Json{{"format_version", kFormatVersion}, {"layers", layers}};
}

std::vector<LayerStats> read_layer_stats(const fs::path& path) {
  std::vector<LayerStats> out;
  if (is_json_path(path)) {
    const Json j = read_json(path);
    for (const auto& g : j.at("layers")) {
      out.push_back({g.at("layer").get<int>(), g.at("m_curv").at("median").get<double>(),
                     g.at("m_mono").at("median").get<double>(), g.at("k_eff").at("value").get<double>()});
    }
    return out;
  }
  const CsvTable t = read_csv(path);
  const std::size_t cl = t.column("layer"), cc = t.column("m_curv_median"), cm = t.column("m_mono_median"), ck = t.column("k_eff");
  for (const auto& r : t.rows) {
    out.push_back({parse_int(r[cl], "layer"), parse_double(r[cc], "m_curv"), parse_double(r[cm], "m_mono"),
                   parse_double(r[ck], "k_eff")});
  }
  return out;
}

CsvTable score_csv(const ScoreTable& table) {
  CsvTable t;
  t.header = {"layer", "score", "predicted_loss", "z_log_curv", "z_log_mono", "z_log_k", "z_log_k_sq", "selected"};
  for (const auto& r : table.rows) {
    t.rows.push_back({std::to_string(r.layer), format_number(r.score), format_number(r.predicted_loss),
                      format_number(r.z_curv), format_number(r.z_mono), format_number(r.z_k), format_number(r.z_k2),
                      r.layer == table.selected_layer ? "1" : "0"});
  }
  return t;
}

Json score_json(const ScoreTable& table) {
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    rows.push_back(Json{{"layer", r.layer},
                        {"score", r.score},
                        {"predicted_loss", r.predicted_loss},
                        {"z_log_curv", r.z_curv},
                        {"z_log_mono", r.z_mono},
                        {"z_log_k", r.z_k},
                        {"z_log_k_sq", r.z_k2}});
  }
  return Json{{"format_version", kFormatVersion},
              {"preset", Json{{"name", table.preset.name}, {"alpha", table.preset.alpha}}},
              {"selected_layer", table.selected_layer},
              {"excluded_layers", table.excluded_layers},
              {"rows", rows}};
}

ScoreTable score_from_json(const Json& j) {
  ScoreTable t;
  t.preset.name = j.at("preset").at("name").get<std::string>();
  t.preset.alpha = j.at("preset").at("alpha").get<std::array<double, 4>>();
  t.selected_layer = j.at("selected_layer").get<int>();
  t.excluded_layers = j.at("excluded_layers").get<std::vector<int>>();
  for (const auto& r : j.at("rows")) {
    t.rows.push_back({r.at("layer").get<int>(), r.at("score").get<double>(), r.at("predicted_loss").get<double>(),
                      r.at("z_log_curv").get<double>(), r.at("z_log_mono").get<double>(), r.at("z_log_k").get<double>(),
                      r.at("z_log_k_sq").get<double>()});
  }
  return t;
}

ScoreTable read_score_table(const fs::path& path) {
  if (is_json_path(path)) return score_from_json(read_json(path));
  const CsvTable csv = read_csv(path);
  ScoreTable t;
  t.preset.name = "unknown";
  const std::size_t cl = csv.column("layer"), cs = csv.column("score");
  for (const auto& r : csv.rows) {
    ScoreRow row;
    row.layer = parse_int(r[cl], "layer");
    row.score = parse_double(r[cs], "score");
    row.predicted_loss = -row.score;
    if (csv.has_column("z_log_curv")) row.z_curv = parse_double(r[csv.column("z_log_curv")], "z_log_curv");
    if (csv.has_column("z_log_mono")) row.z_mono = parse_double(r[csv.column("z_log_mono")], "z_log_mono");
    if (csv.has_column("z_log_k")) row.z_k = parse_double(r[csv.column("z_log_k")], "z_log_k");
    if (csv.has_column("z_log_k_sq")) row.z_k2 = parse_double(r[csv.column("z_log_k_sq")], "z_log_k_sq");
    t.rows.push_back(row);
  }
  if (t.rows.empty()) throw std::invalid_argument(path.string() + ": no score rows");
  t.selected_layer = argmax_layer(t.rows);
  return t;
}

CsvTable loss_csv(std::span<const LayerLoss> losses) {
  CsvTable t;
  t.header = {"layer", "train_loss", "val_loss"};
  for (const auto& l : losses) {
    t.rows.push_back({std::to_string(l.layer), opt_number(l.train_loss), format_number(l.val_loss)});
  }
  return t;
}

std::vector<LayerLoss> read_losses(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t cl = t.column("layer"), cv = t.column("val_loss");
  const bool has_train = t.has_column("train_loss");
  std::vector<LayerLoss> out;
  for (const auto& r : t.rows) {
    LayerLoss l;
    l.layer = parse_int(r[cl], "layer");
    l.val_loss = parse_double(r[cv], "val_loss");
    if (has_train && !r[t.column("train_loss")].empty()) l.train_loss = parse_double(r[t.column("train_loss")], "train_loss");
    out.push_back(l);
  }
  return out;
}

Json correlation_json(const CorrelationReport& report) {
  Json j{{"format_version", kFormatVersion},
         {"n_layers", report.n_layers},
         {"spearman", opt_json(report.spearman)},
         {"kendall", opt_json(report.kendall)},
         {"pearson", opt_json(report.pearson)},
         {"best_predicted_layer", report.best_predicted_layer},
         {"best_observed_layer", report.best_observed_layer},
         {"rank_gap", report.rank_gap}};
  if (report.repeats) {
    const RepeatStats& r = *report.repeats;
    auto ms = [](const MeanStd& v) { return Json{{"mean", v.mean}, {"std", v.std}}; };
    j["repeats"] = Json{{"count", r.count}, {"spearman", ms(r.spearman)}, {"kendall", ms(r.kendall)}, {"pearson", ms(r.pearson)}};
  } else {
    j["repeats"] = nullptr;
  }
  return j;
}

std::string correlation_text(const CorrelationReport& report) {
  auto cell = [&](const std::optional<double>& point, const MeanStd* rep) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4);
    if (rep != nullptr) {
      s << rep->mean << " +/- " << rep->std;
    } else if (point) {
      s << *point;
    } else {
      s << "undefined";
    }
    return s.str();
  };
  const RepeatStats* r = report.repeats ? &*report.repeats : nullptr;
  std::ostringstream out;
  out << std::left << std::setw(22) << "Spearman rho" << cell(report.spearman, r ? &r->spearman : nullptr) << '\n'
      << std::setw(22) << "Kendall tau" << cell(report.kendall, r ? &r->kendall : nullptr) << '\n'
      << std::setw(22) << "Pearson r" << cell(report.pearson, r ? &r->pearson : nullptr) << '\n'
      << std::setw(22) << "Best predicted layer" << report.best_predicted_layer << '\n'
      << std::setw(22) << "Best observed layer" << report.best_observed_layer << '\n'
      << std::setw(22) << "Rank gap" << report.rank_gap << '\n'
      << std::setw(22) << "Layers" << report.n_layers << '\n';
  if (r) out << std::setw(22) << "Repeats" << r->count << '\n';
  return out.str();
}

CsvTable sensitivity_csv(std::span<const SensitivityRow> rows) {
  CsvTable t;
  t.header = {"preset", "alpha1", "alpha2", "alpha3", "alpha4", "selected_layer", "selected_loss", "oracle_layer", "gap",
              "spearman"};
  for (const auto& r : rows) {
    t.rows.push_back({r.preset.name, format_number(r.preset.alpha[0]), format_number(r.preset.alpha[1]),
                      format_number(r.preset.alpha[2]), format_number(r.preset.alpha[3]), std::to_string(r.selected_layer),
                      opt_number(r.selected_loss), r.oracle_layer ? std::to_string(*r.oracle_layer) : std::string(),
                      opt_number(r.gap), opt_number(r.spearman)});
  }
  return t;
}

Json sensitivity_json(std::span<const SensitivityRow> rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    arr.push_back(Json{{"preset", r.preset.name},
                       {"alpha", r.preset.alpha},
                       {"selected_layer", r.selected_layer},
                       {"selected_loss", opt_json(r.selected_loss)},
                       {"oracle_layer", r.oracle_layer ? Json(*r.oracle_layer) : Json(nullptr)},
                       {"gap", opt_json(r.gap)},
                       {"spearman", opt_json(r.spearman)}});
  }
  return Json{{"format_version", kFormatVersion}, {"rows", arr}};
}

std::vector<ScorePreset> read_presets(const fs::path& path) {
  const Json j = read_json(path);
  const Json& arr = j.is_object() ? j.at("presets") : j;
  std::vector<ScorePreset> out;
  for (const auto& p : arr) {
    ScorePreset preset{p.at("name").get<std::string>(), p.at("alpha").get<std::array<double, 4>>()};
    preset.validate();
    out.push_back(preset);
  }
  if (out.empty()) throw std::invalid_argument(path.string() + ": no presets");
  return out;
}

SynthLayerSpec layer_spec_from_json(const Json& j) {
  reject_unknown(j,
                 {"ambient_dim", "intrinsic_k", "spectrum", "manifold", "off_manifold_noise", "embed_rotation_seed",
                  "n_points", "condition_coupling"},
                 "layer spec");
  SynthLayerSpec s;
  read_field(j, "ambient_dim", s.ambient_dim);
  read_field(j, "intrinsic_k", s.intrinsic_k);
  read_field(j, "spectrum", s.spectrum);
  if (j.contains("manifold")) s.manifold = manifold_from_string(j.at("manifold").get<std::string>());
  read_field(j, "off_manifold_noise", s.off_manifold_noise);
  read_field(j, "embed_rotation_seed", s.embed_rotation_seed);
  read_field(j, "n_points", s.n_points);
  read_field(j, "condition_coupling", s.condition_coupling);
  s.validate();
  return s;
}

Json layer_spec_json(const SynthLayerSpec& s) {
  return Json{{"ambient_dim", s.ambient_dim},
              {"intrinsic_k", s.intrinsic_k},
              {"spectrum", s.spectrum},
              {"manifold", to_string(s.manifold)},
              {"off_manifold_noise", s.off_manifold_noise},
              {"embed_rotation_seed", s.embed_rotation_seed},
              {"n_points", s.n_points},
              {"condition_coupling", s.condition_coupling}};
}

PseudoDumpConfig dump_config_from_json(const Json& j, PseudoDumpConfig c) {
  reject_unknown(j, {"n_seqs", "seq_len", "seed", "dtype", "token_jitter", "embedding_noise", "model_name"}, "dump config");
  read_field(j, "n_seqs", c.n_seqs);
  read_field(j, "seq_len", c.seq_len);
  read_field(j, "seed", c.seed);
  if (j.contains("dtype")) c.dtype = dtype_from_string(j.at("dtype").get<std::string>());
  read_field(j, "token_jitter", c.token_jitter);
  read_field(j, "embedding_noise", c.embedding_noise);
  read_field(j, "model_name", c.model_name);
  return c;
}

Json dump_config_json(const PseudoDumpConfig& c) {
  return Json{{"n_seqs", c.n_seqs},          {"seq_len", c.seq_len},
              {"seed", c.seed},              {"dtype", to_string(c.dtype)},
              {"token_jitter", c.token_jitter}, {"embedding_noise", c.embedding_noise},
              {"model_name", c.model_name}};
}

BridgeConfig bridge_config_from_json(const Json& j, BridgeConfig c) {
  reject_unknown(j,
                 {"hidden_width", "train_steps", "batch", "lr", "momentum", "noise_schedule", "seed", "train_fraction",
                  "split_seed", "max_examples"},
                 "bridge config");
  read_field(j, "hidden_width", c.hidden_width);
  read_field(j, "train_steps", c.train_steps);
  read_field(j, "batch", c.batch);
  read_field(j, "lr", c.lr);
  read_field(j, "momentum", c.momentum);
  read_field(j, "noise_schedule", c.noise_schedule);
  read_field(j, "seed", c.seed);
  read_field(j, "train_fraction", c.train_fraction);
  read_field(j, "split_seed", c.split_seed);
  read_field(j, "max_examples", c.max_examples);
  c.validate();
  return c;
}

Json bridge_config_json(const BridgeConfig& c) { return Json::parse(c.fingerprint()); }

ProxyConfig proxy_config_from_json(const Json& j, ProxyConfig c) {
  reject_unknown(j, {"knn_k", "n_anchors", "n_pairs", "ridge", "bootstrap_resamples", "ci_level", "seed"}, "proxy config");
  read_field(j, "knn_k", c.knn_k);
  read_field(j, "n_anchors", c.n_anchors);
  read_field(j, "n_pairs", c.n_pairs);
  read_field(j, "ridge", c.ridge);
  read_field(j, "bootstrap_resamples", c.bootstrap_resamples);
  read_field(j, "ci_level", c.ci_level);
  read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

Json proxy_config_json(const ProxyConfig& c) {
  return Json{{"knn_k", c.knn_k},     {"n_anchors", c.n_anchors},
              {"n_pairs", c.n_pairs}, {"ridge", c.ridge},
              {"bootstrap_resamples", c.bootstrap_resamples}, {"ci_level", c.ci_level},
              {"seed", c.seed}};
}

ExtractConfig extract_config_from_json(const Json& j, ExtractConfig c) {
  reject_unknown(j, {"pooling", "max_seqs", "max_tokens", "proj_dim", "seed"}, "extract config");
  if (j.contains("pooling")) c.pooling = pooling_from_string(j.at("pooling").get<std::string>());
  read_field(j, "max_seqs", c.max_seqs);
  read_field(j, "max_tokens", c.max_tokens);
  read_field(j, "proj_dim", c.proj_dim);
  read_field(j, "seed", c.seed);
  return c;
}

Json extract_config_json(const ExtractConfig& c) {
  return Json{{"pooling", to_string(c.pooling)},
              {"max_seqs", c.max_seqs},
              {"max_tokens", c.max_tokens},
              {"proj_dim", c.proj_dim},
              {"seed", c.seed}};
}

ExperimentSpec experiment_spec_from_json(const Json& j) {
  reject_unknown(j, {"layers", "dump", "extract", "proxy", "bridge", "preset", "exclude_layers"}, "experiment spec");
  ExperimentSpec spec;
  if (!j.contains("layers") || !j.at("layers").is_array() || j.at("layers").empty()) {
    throw std::invalid_argument("experiment spec needs a non-empty 'layers' array");
  }
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_spec_from_json(l));
  ExperimentConfig& c = spec.config;
  if (j.contains("dump")) c.dump = dump_config_from_json(j.at("dump"));
  if (j.contains("extract")) c.extract = extract_config_from_json(j.at("extract"));
  if (j.contains("proxy")) c.proxy = proxy_config_from_json(j.at("proxy"));
  if (j.contains("bridge")) c.bridge = bridge_config_from_json(j.at("bridge"));
  if (j.contains("preset")) {
    const std::string name = j.at("preset").get<std::string>();
    const auto preset = find_builtin_preset(name);
    if (!preset) throw std::invalid_argument("unknown preset '" + name + "'");
    c.preset = *preset;
  }
  read_field(j, "exclude_layers", c.exclude_layers);
  return spec;
}

Json experiment_spec_json(const ExperimentSpec& spec) {
  Json layers = Json::array();
  for (const auto& l : spec.layers) layers.push_back(layer_spec_json(l));
  const ExperimentConfig& c = spec.config;
  return Json{{"layers", layers},
              {"dump", dump_config_json(c.dump)},
              {"extract", extract_config_json(c.extract)},
              {"proxy", proxy_config_json(c.proxy)},
              {"bridge", bridge_config_json(c.bridge)},
              {"preset", c.preset.name},
              {"exclude_layers", c.exclude_layers}};
}

ExperimentSpec read_experiment_spec(const fs::path& path) { return experiment_spec_from_json(read_json(path)); }

CsvTable sweep_csv(const SweepResult& sweep) {
  CsvTable t;
  t.header = {"layer", "train_loss", "val_loss"};
  for (const auto& l : sweep.layers) {
    t.rows.push_back({std::to_string(l.layer), format_number(l.losses.train_loss), format_number(l.losses.val_loss)});
  }
  return t;
}

Json sweep_json(const SweepResult& sweep) {
  Json layers = Json::array();
  for (const auto& l : sweep.layers) {
    layers.push_back(Json{{"layer", l.layer},
                          {"train_loss", l.losses.train_loss},
                          {"val_loss", l.losses.val_loss},
                          {"init_val_loss", l.losses.init_val_loss},
                          {"target_variance", l.losses.target_variance},
                          {"n_train", l.losses.n_train},
                          {"n_val", l.losses.n_val},
                          {"steps", l.losses.steps},
                          {"config_fingerprint", l.config_fingerprint}});
  }
  return Json{{"format_version", kFormatVersion}, {"config", bridge_config_json(sweep.config)}, {"layers", layers}};
}

Json contraction_json(const ContractionReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"t", row.t}, {"w2", row.w2}, {"bound", row.bound}, {"allowed", row.allowed}, {"ok", row.ok}});
  }
  return Json{{"check", "contraction"},
              {"passed", r.passed},
              {"m", r.m},
              {"w2_initial", r.w2_initial},
              {"fitted_exponent", r.fitted_exponent},
              {"rel_tol", r.rel_tol},
              {"abs_slack", r.abs_slack},
              {"rows", rows}};
}

Json perturbation_json(const PerturbationReport& r) {
  return Json{{"check", "perturbation"},   {"passed", r.passed},
              {"epsilon", r.epsilon},      {"m", r.m},
              {"bound", r.bound},          {"w2", r.w2},
              {"w2_to_target", r.w2_to_target}, {"horizon", r.horizon},
              {"rel_tol", r.rel_tol},      {"noise_floor", r.noise_floor}};
}

Json monotonicity_json(const MonotonicityReport& r) {
  return Json{{"check", "monotonicity"}, {"passed", r.passed},       {"n_pairs", r.n_pairs}, {"violations", r.violations},
              {"m", r.m},                {"min_ratio", r.min_ratio}, {"slack", r.slack}};
}

Json concentration_json(const ConcentrationReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) rows.push_back(Json{{"t", row.t}, {"tail", row.tail}, {"constant", row.constant}});
  return Json{{"check", "concentration"},
              {"passed", r.passed},
              {"m", r.m},
              {"n_samples", r.n_samples},
              {"fitted_constant", opt_json(r.fitted_constant)},
              {"threshold", r.threshold},
              {"rows", rows}};
}

CsvTable contraction_curve_csv(const ContractionReport& r) {
  CsvTable t;
  t.header = {"t", "w2", "bound"};
  t.rows.push_back({"0", format_number(r.w2_initial), format_number(r.w2_initial)});
  for (const auto& row : r.rows) t.rows.push_back({format_number(row.t), format_number(row.w2), format_number(row.bound)});
  return t;
}

}  // namespace layergeo
