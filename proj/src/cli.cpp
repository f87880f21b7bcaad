#include "layergeo/cli.hpp"

#include <glob.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "layergeo/correlate.hpp"
#include "layergeo/dumpio.hpp"
#include "layergeo/geoproxy.hpp"
#include "layergeo/kernels.hpp"
#include "layergeo/langevin.hpp"
#include "layergeo/score.hpp"
#include "layergeo/synth.hpp"
#include "layergeo/tables.hpp"
#include "layergeo/toybridge.hpp"

namespace layergeo {

namespace {

// Raised when a verification ran but did not pass; maps to exit code 1.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + suffix);
  return out;
}

// Writes the CSV and JSON forms side by side; --out picks which one gets the
// exact name.
void write_pair(const fs::path& out, const CsvTable& csv, const Json& json) {
  if (out.extension() == ".json") {
    write_json(json, out);
    write_csv(csv, with_suffix(out, ".csv"));
  } else {
    write_csv(csv, out);
    write_json(json, with_suffix(out, ".json"));
  }
}

void write_text(const std::string& text, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Json option_values(const CLI::App& app) {
  Json j = Json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    std::string name = opt->get_name();
    name.erase(0, name.find_first_not_of('-'));
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() == 0) {
        j[name] = true;
      } else if (res.size() == 1) {
        j[name] = res.front();
      } else {
        j[name] = res;
      }
    } else if (opt->get_expected_max() == 0) {
      j[name] = false;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad integer list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad number list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw std::runtime_error("glob failed for '" + pattern + "'");
  if (out.empty()) throw std::invalid_argument("no files match '" + pattern + "'");
  std::sort(out.begin(), out.end());
  return out;
}

std::string plot_geometry(std::span<const LayerGeometry> geometry) {
  std::ostringstream s;
  s << "# layer m_curv m_mono k_eff\n";
  for (const auto& g : geometry) {
    s << g.layer << ' ' << format_number(g.m_curv.median) << ' ' << format_number(g.m_mono.median) << ' '
      << format_number(g.k_eff.value) << '\n';
  }
  return s.str();
}

std::string plot_score_loss(const ScoreTable& scores, std::span<const LayerLoss> losses) {
  std::ostringstream s;
  s << "# layer score val_loss\n";
  for (const auto& r : scores.rows) {
    const auto it = std::find_if(losses.begin(), losses.end(), [&](const LayerLoss& l) { return l.layer == r.layer; });
    if (it == losses.end()) continue;
    s << r.layer << ' ' << format_number(r.score) << ' ' << format_number(it->val_loss) << '\n';
  }
  return s.str();
}

struct Context {
  std::vector<std::string> argv;
  bool plot = false;
  std::ostream* out = nullptr;

  void echo(const CLI::App& app, const CLI::App& sub, const fs::path& path, const Json& resolved = nullptr) const {
    Json j;
    j["tool"] = "layergeo";
    j["format_version"] = kFormatVersion;
    j["subcommand"] = sub.get_name();
    j["argv"] = argv;
    j["shared"] = option_values(app);
    j["options"] = option_values(sub);
    if (!resolved.is_null()) j["resolved"] = resolved;
    write_json(j, path);
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layer geometry toolkit: proxies, selection scores, Langevin checks and toy bridge sweeps"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  ctx.argv = args;
  ctx.out = &out;
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--plot", ctx.plot, "Also write whitespace-separated plot data");

  std::function<int()> action;

  // geometry
  std::string g_dump, g_out = "geometry.csv", g_pooling = "mean";
  ExtractConfig g_ext;
  ProxyConfig g_proxy;
  auto* geometry = app.add_subcommand("geometry", "Per-layer geometry proxies of an activation dump");
  geometry->add_option("--dump", g_dump, "Dump directory or manifest")->required();
  geometry->add_option("--pooling", g_pooling, "mean|last|token")->capture_default_str();
  geometry->add_option("--max-seqs", g_ext.max_seqs)->capture_default_str();
  geometry->add_option("--max-tokens", g_ext.max_tokens)->capture_default_str();
  geometry->add_option("--proj-dim", g_ext.proj_dim)->capture_default_str();
  geometry->add_option("--ridge", g_proxy.ridge)->capture_default_str();
  geometry->add_option("--knn", g_proxy.knn_k)->capture_default_str();
  geometry->add_option("--anchors", g_proxy.n_anchors)->capture_default_str();
  geometry->add_option("--pairs", g_proxy.n_pairs)->capture_default_str();
  geometry->add_option("--bootstrap", g_proxy.bootstrap_resamples)->capture_default_str();
  geometry->add_option("--ci-level", g_proxy.ci_level)->capture_default_str();
  std::uint64_t g_seed = 0;
  geometry->add_option("--seed", g_seed)->capture_default_str();
  geometry->add_option("--out", g_out, "Output CSV (JSON written alongside)")->capture_default_str();
  geometry->callback([&] {
    action = [&] {
      g_ext.pooling = pooling_from_string(g_pooling);
      g_ext.seed = g_seed;
      g_proxy.seed = g_seed;
      g_proxy.validate();
      const DumpManifest dump = load_manifest(g_dump);
      const auto geo = profile_layers(dump, g_ext, g_proxy);
      write_pair(g_out, geometry_csv(geo), geometry_json(geo));
      if (ctx.plot) write_text(plot_geometry(geo), with_suffix(g_out, "_plot.dat"));
      ctx.echo(app, *geometry, with_suffix(g_out, ".config.json"));
      return 0;
    };
  });

  // score
  std::string s_geometry, s_preset, s_alpha, s_exclude = "-1", s_out = "scores.csv";
  auto* score = app.add_subcommand("score", "Selection score and selected layer");
  score->add_option("--geometry", s_geometry, "Geometry CSV or JSON")->required();
  auto* preset_opt = score->add_option("--preset", s_preset, "Built-in preset name (default final)");
  score->add_option("--alpha", s_alpha, "Coefficients a1,a2,a3,a4")->excludes(preset_opt);
  score->add_option("--exclude-layers", s_exclude, "Comma-separated layers left out of scoring")->capture_default_str();
  score->add_option("--out", s_out, "Output CSV (JSON selection record alongside)")->capture_default_str();
  score->callback([&] {
    action = [&] {
      ScorePreset preset = final_preset();
      if (!s_alpha.empty()) {
        const auto a = parse_double_list(s_alpha);
        if (a.size() != 4) throw std::invalid_argument("--alpha needs exactly four values");
        preset = {"custom", {a[0], a[1], a[2], a[3]}};
      } else if (!s_preset.empty()) {
        const auto p = find_builtin_preset(s_preset);
        if (!p) throw std::invalid_argument("unknown preset '" + s_preset + "'");
        preset = *p;
      }
      const auto stats = read_layer_stats(s_geometry);
      const auto exclude = parse_int_list(s_exclude);
      const ScoreTable table = selection_score(stats, preset, exclude);
      write_pair(s_out, score_csv(table), score_json(table));
      *ctx.out << "selected_layer " << table.selected_layer << '\n';
      ctx.echo(app, *score, with_suffix(s_out, ".config.json"));
      return 0;
    };
  });

  // correlate
  std::string c_scores, c_losses, c_repeats, c_out = "correlation.json";
  auto* correlate = app.add_subcommand("correlate", "Agreement between scores and bridge losses");
  correlate->add_option("--scores", c_scores, "Score JSON record or CSV")->required();
  correlate->add_option("--losses", c_losses, "Loss CSV (layer, val_loss)")->required();
  correlate->add_option("--repeats", c_repeats, "Glob of repeated score tables");
  correlate->add_option("--out", c_out, "Report JSON (text table alongside)")->capture_default_str();
  correlate->callback([&] {
    action = [&] {
      const ScoreTable table = read_score_table(c_scores);
      const auto losses = read_losses(c_losses);
      std::vector<ScoreTable> repeats;
      if (!c_repeats.empty()) {
        for (const auto& p : expand_glob(c_repeats)) repeats.push_back(read_score_table(p));
      }
      const CorrelationReport report = agreement_report(table, losses, repeats);
      write_json(correlation_json(report), c_out);
      const std::string text = correlation_text(report);
      write_text(text, with_suffix(c_out, ".txt"));
      *ctx.out << text;
      if (ctx.plot) write_text(plot_score_loss(table, losses), with_suffix(c_out, "_plot.dat"));
      ctx.echo(app, *correlate, with_suffix(c_out, ".config.json"));
      return 0;
    };
  });

  // sensitivity
  std::string v_geometry, v_losses, v_presets = "builtin", v_exclude = "-1", v_out = "sensitivity.csv";
  auto* sensitivity = app.add_subcommand("sensitivity", "Layer selection under coefficient presets");
  sensitivity->add_option("--geometry", v_geometry, "Geometry CSV or JSON")->required();
  sensitivity->add_option("--losses", v_losses, "Optional loss CSV");
  sensitivity->add_option("--presets", v_presets, "builtin or a presets JSON file")->capture_default_str();
  sensitivity->add_option("--exclude-layers", v_exclude)->capture_default_str();
  sensitivity->add_option("--out", v_out, "Output CSV (JSON alongside)")->capture_default_str();
  sensitivity->callback([&] {
    action = [&] {
      const auto stats = read_layer_stats(v_geometry);
      const std::vector<ScorePreset> presets = v_presets == "builtin" ? builtin_presets() : read_presets(v_presets);
      const auto exclude = parse_int_list(v_exclude);
      std::vector<LayerLoss> losses;
      if (!v_losses.empty()) losses = read_losses(v_losses);
      const auto rows = sensitivity_sweep(
          stats, presets, exclude,
          v_losses.empty() ? std::nullopt : std::optional<std::span<const LayerLoss>>(std::span<const LayerLoss>(losses)));
      write_pair(v_out, sensitivity_csv(rows), sensitivity_json(rows));
      ctx.echo(app, *sensitivity, with_suffix(v_out, ".config.json"));
      return 0;
    };
  });

  // simulate
  std::string m_check = "all", m_out = "simulate.json", m_times = "0.25,0.5,1.0";
  std::size_t m_dim = 1, m_steps = 5000, m_particles = 100000, m_samples = 1000000, m_pairs = 100000;
  double m_m = 2.0, m_dt = 1e-3, m_eps = 0.4, m_start = 5.0, m_control_df = 3.0;
  std::uint64_t m_seed = 0;
  auto* simulate_cmd = app.add_subcommand("simulate", "Numerical checks of the Langevin contraction results");
  simulate_cmd->add_option("--check", m_check, "contraction|perturbation|monotonicity|concentration|all")
      ->check(CLI::IsMember({"contraction", "perturbation", "monotonicity", "concentration", "all"}))
      ->capture_default_str();
  simulate_cmd->add_option("--dim", m_dim)->capture_default_str();
  simulate_cmd->add_option("--m", m_m, "Strong convexity constant")->capture_default_str();
  simulate_cmd->add_option("--dt", m_dt)->capture_default_str();
  simulate_cmd->add_option("--steps", m_steps, "Horizon of the perturbation run")->capture_default_str();
  simulate_cmd->add_option("--particles", m_particles)->capture_default_str();
  simulate_cmd->add_option("--times", m_times, "Contraction check times")->capture_default_str();
  simulate_cmd->add_option("--start", m_start, "Contraction start point along the first axis")->capture_default_str();
  simulate_cmd->add_option("--epsilon", m_eps, "Constant score shift")->capture_default_str();
  simulate_cmd->add_option("--pairs", m_pairs, "Monotonicity pairs")->capture_default_str();
  simulate_cmd->add_option("--samples", m_samples, "Concentration samples")->capture_default_str();
  simulate_cmd->add_option("--control-df", m_control_df, "Student-t control degrees of freedom")->capture_default_str();
  simulate_cmd->add_option("--seed", m_seed)->capture_default_str();
  simulate_cmd->add_option("--out", m_out, "Report JSON")->capture_default_str();
  simulate_cmd->callback([&] {
    action = [&] {
      const bool all = m_check == "all";
      const auto d = static_cast<Eigen::Index>(m_dim);
      if (d < 1) throw std::invalid_argument("--dim must be positive");
      Json checks = Json::array();
      std::vector<std::string> failed;
      auto record = [&](const std::string& name, Json j, bool passed) {
        checks.push_back(std::move(j));
        if (!passed) failed.push_back(name);
      };
      if (all || m_check == "contraction") {
        LangevinRun run{Potential::isotropic(m_dim, m_m), m_dt, 0, m_particles, m_seed, Coupling::independent, {}};
        Vector x0 = Vector::Zero(d);
        x0(0) = m_start;
        const auto times = parse_double_list(m_times);
        const auto rep = verify_contraction(run, x0, times);
        record("contraction", contraction_json(rep), rep.passed);
        if (ctx.plot) {
          std::ostringstream s;
          s << "# t w2 bound\n0 " << format_number(rep.w2_initial) << ' ' << format_number(rep.w2_initial) << '\n';
          for (const auto& r : rep.rows) s << format_number(r.t) << ' ' << format_number(r.w2) << ' ' << format_number(r.bound) << '\n';
          write_text(s.str(), with_suffix(m_out, "_w2_plot.dat"));
        }
        write_csv(contraction_curve_csv(rep), with_suffix(m_out, "_w2.csv"));
      }
      if (all || m_check == "perturbation") {
        Vector v = Vector::Zero(d);
        v(0) = 1.0;
        LangevinRun run{Potential::isotropic(m_dim, m_m), m_dt, m_steps, m_particles, m_seed, Coupling::synchronous,
                        ScorePerturbation{ScorePerturbation::Kind::constant, m_eps, v}};
        const auto rep = verify_perturbation(run);
        record("perturbation", perturbation_json(rep), rep.passed);
      }
      if (all || m_check == "monotonicity") {
        Vector diag(d);
        for (Eigen::Index j = 0; j < d; ++j) diag(j) = m_m * (1.0 + (d > 1 ? 3.0 * static_cast<double>(j) / static_cast<double>(d - 1) : 0.0));
        const Potential u = Potential::quadratic(diag.asDiagonal(), Vector::Zero(d));
        const auto rep = verify_monotonicity(u, m_pairs, 5.0, m_seed);
        record("monotonicity", monotonicity_json(rep), rep.passed);
      }
      if (all || m_check == "concentration") {
        const auto rep = verify_concentration(sample_gaussian_target(m_dim, m_m, m_samples, m_seed), m_m);
        Json j = concentration_json(rep);
        const auto control = verify_concentration(sample_student_t(m_dim, m_control_df, m_samples, m_seed), m_m);
        Json cj = concentration_json(control);
        cj["expected_failure"] = true;
        cj["below_gaussian"] = control.fitted_constant && rep.fitted_constant && *control.fitted_constant < *rep.fitted_constant;
        j["heavy_tail_control"] = cj;
        record("concentration", j, rep.passed);
      }
      Json report{{"format_version", kFormatVersion}, {"passed", failed.empty()}, {"checks", checks}};
      write_json(report, m_out);
      ctx.echo(app, *simulate_cmd, with_suffix(m_out, ".config.json"));
      if (!failed.empty()) {
        std::string names;
        for (const auto& f : failed) names += (names.empty() ? "" : ",") + f;
        throw CheckFailed("verification failed: " + names);
      }
      return 0;
    };
  });

  // synth
  std::string y_spec, y_out;
  std::optional<std::uint64_t> y_seed;
  auto* synth = app.add_subcommand("synth", "Write a synthetic pseudo-dump");
  synth->add_option("--spec", y_spec, "Experiment/spec JSON with a 'layers' array")->required();
  synth->add_option("--out", y_out, "Dump directory")->required();
  synth->add_option("--seed", y_seed, "Overrides the spec's dump seed");
  synth->callback([&] {
    action = [&] {
      ExperimentSpec spec = read_experiment_spec(y_spec);
      if (y_seed) spec.config.dump.seed = *y_seed;
      gen_pseudo_dump(spec.layers, spec.config.dump, y_out);
      ctx.echo(app, *synth, fs::path(y_out) / "config.json", experiment_spec_json(spec));
      return 0;
    };
  });

  // sweep
  std::string w_dump, w_out = "losses.csv";
  BridgeConfig w_cfg;
  auto* sweep = app.add_subcommand("sweep", "Fixed-budget toy bridge per layer");
  sweep->add_option("--dump", w_dump, "Dump directory or manifest")->required();
  sweep->add_option("--budget-steps", w_cfg.train_steps)->capture_default_str();
  sweep->add_option("--width", w_cfg.hidden_width)->capture_default_str();
  sweep->add_option("--batch", w_cfg.batch)->capture_default_str();
  sweep->add_option("--lr", w_cfg.lr)->capture_default_str();
  sweep->add_option("--max-examples", w_cfg.max_examples)->capture_default_str();
  sweep->add_option("--split-seed", w_cfg.split_seed)->capture_default_str();
  sweep->add_option("--seed", w_cfg.seed)->capture_default_str();
  sweep->add_option("--out", w_out, "Loss CSV (JSON budget record alongside)")->capture_default_str();
  sweep->callback([&] {
    action = [&] {
      const SweepResult result = fixed_budget_sweep(load_manifest(w_dump), w_cfg);
      write_pair(w_out, sweep_csv(result), sweep_json(result));
      ctx.echo(app, *sweep, with_suffix(w_out, ".config.json"));
      return 0;
    };
  });

  // experiment
  std::string e_spec, e_out;
  std::optional<std::uint64_t> e_seed;
  auto* experiment = app.add_subcommand("experiment", "Pseudo-dump, geometry, score, sweep and correlation");
  experiment->add_option("--spec", e_spec, "Experiment JSON")->required();
  experiment->add_option("--out", e_out, "Output directory")->required();
  experiment->add_option("--seed", e_seed, "Overrides every seed in the spec");
  experiment->callback([&] {
    action = [&] {
      ExperimentSpec spec = read_experiment_spec(e_spec);
      if (e_seed) {
        spec.config.dump.seed = *e_seed;
        spec.config.extract.seed = *e_seed;
        spec.config.proxy.seed = *e_seed;
        spec.config.bridge.seed = *e_seed;
      }
      const fs::path dir = e_out;
      const ExperimentResult r = end_to_end_experiment(spec.layers, spec.config, dir / "dump");
      write_pair(dir / "geometry.csv", geometry_csv(r.geometry), geometry_json(r.geometry));
      write_pair(dir / "scores.csv", score_csv(r.scores), score_json(r.scores));
      write_pair(dir / "losses.csv", sweep_csv(r.sweep), sweep_json(r.sweep));
      write_json(correlation_json(r.report), dir / "report.json");
      const std::string text = correlation_text(r.report);
      write_text(text, dir / "report.txt");
      *ctx.out << text;
      if (ctx.plot) {
        write_text(plot_geometry(r.geometry), dir / "geometry_plot.dat");
        const auto losses = r.sweep.losses();
        write_text(plot_score_loss(r.scores, losses), dir / "score_loss_plot.dat");
      }
      ctx.echo(app, *experiment, dir / "config.json", experiment_spec_json(spec));
      return 0;
    };
  });

  std::string active = "layergeo";
  try {
    std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(reversed.begin(), reversed.end());
    app.parse(reversed);
    for (const CLI::App* sub : app.get_subcommands()) active = sub->get_name();
    kernels::set_thread_count(threads);
    return action ? action() : 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    for (const std::string& a : args) {
      if (!app.get_subcommands([&](const CLI::App* s) { return s->get_name() == a; }).empty()) {
        active = a;
        break;
      }
    }
    err << Json{{"error", {{"kind", "usage"}, {"message", e.what()}}}, {"subcommand", active}}.dump() << '\n';
    return 2;
  } catch (const CheckFailed& e) {
    err << Json{{"error", {{"kind", "check_failed"}, {"message", e.what()}}}, {"subcommand", active}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << Json{{"error", {{"kind", "runtime"}, {"message", e.what()}}}, {"subcommand", active}}.dump() << '\n';
    return 2;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace layergeo
