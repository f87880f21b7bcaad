#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "layergeo/cli.hpp"
#include "layergeo/tables.hpp"
#include "test_util.hpp"

using namespace layergeo;
using Json = nlohmann::ordered_json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "layergeo");
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const char* kSmallSpec = R"({
  "layers": [
    {"ambient_dim": 12, "intrinsic_k": 2, "spectrum": [1, 1], "embed_rotation_seed": 1},
    {"ambient_dim": 12, "intrinsic_k": 2, "spectrum": [1, 1], "embed_rotation_seed": 2, "off_manifold_noise": 0.1, "condition_coupling": 0.6},
    {"ambient_dim": 12, "intrinsic_k": 2, "spectrum": [1, 1], "embed_rotation_seed": 3, "off_manifold_noise": 0.2, "condition_coupling": 0.2}
  ],
  "dump": {"n_seqs": 160, "seq_len": 6, "seed": 5},
  "proxy": {"n_anchors": 64, "n_pairs": 400, "bootstrap_resamples": 50},
  "bridge": {"train_steps": 150, "hidden_width": 8, "max_examples": 1000}
})";

}  // namespace

TEST_CASE("usage errors are reported as JSON with exit code 2") {
  const Run unknown = cli({"score", "--geometry", "g.csv", "--bogus"});
  CHECK(unknown.code == 2);
  const Json e = Json::parse(unknown.err);
  CHECK(e["error"]["kind"] == "usage");
  CHECK(e["subcommand"] == "score");

  CHECK(cli({}).code == 2);
  CHECK(cli({"nosuch"}).code == 2);
  CHECK(cli({"score", "--geometry", "g.csv", "--preset", "final", "--alpha", "1,1,1,1"}).code == 2);

  const Run missing = cli({"score", "--geometry", "/nonexistent/g.csv"});
  CHECK(missing.code == 2);
  CHECK(Json::parse(missing.err)["error"]["kind"] == "runtime");

  const Run help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("geometry") != std::string::npos);
}

TEST_CASE("correlate reproduces the six-row fixture") {
  testutil::TempDir dir("cli_corr");
  testutil::spit(dir / "scores.csv",
                 "layer,score\n3,2.360\n1,1.271\n2,1.857\n7,2.324\n17,0.265\n27,-4.094\n");
  testutil::spit(dir / "losses.csv",
                 "layer,val_loss\n3,0.331\n1,0.324\n2,0.327\n7,0.362\n17,0.397\n27,0.656\n");
  const fs::path out = dir / "corr.json";
  const Run r = cli({"correlate", "--scores", (dir / "scores.csv").string(), "--losses", (dir / "losses.csv").string(),
                     "--out", out.string()});
  REQUIRE(r.code == 0);
  const Json j = read_json(out);
  CHECK(std::abs(j["spearman"].get<double>() - 0.4857142857142857) < 1e-9);
  CHECK(j["best_predicted_layer"] == 3);
  CHECK(j["best_observed_layer"] == 1);
  CHECK(fs::exists(dir / "corr.txt"));
  CHECK(fs::exists(dir / "corr.config.json"));
  CHECK(r.out.find("Spearman rho") != std::string::npos);
}

TEST_CASE("score picks the lowest layer on an all-equal fixture") {
  testutil::TempDir dir("cli_score");
  testutil::spit(dir / "geo.csv", "layer,m_curv_median,m_mono_median,k_eff\n0,2,3,4\n1,2,3,4\n2,2,3,4\n");
  const Run r = cli({"score", "--geometry", (dir / "geo.csv").string(), "--alpha", "1,0.5,-1,0.25", "--out",
                     (dir / "s.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == "selected_layer 0\n");
  const CsvTable t = read_csv(dir / "s.csv");
  CHECK(t.rows.size() == 3);
  CHECK(t.rows[0][t.column("selected")] == "1");
  const Json cfg = read_json(dir / "s.config.json");
  CHECK(cfg["subcommand"] == "score");
  CHECK(cfg["options"]["alpha"] == "1,0.5,-1,0.25");

  CHECK(cli({"score", "--geometry", (dir / "geo.csv").string(), "--alpha", "1,2,3", "--out", (dir / "x.csv").string()})
            .code == 2);
  testutil::spit(dir / "bad.csv", "layer,m_curv_median,m_mono_median,k_eff\n0,0,3,4\n1,2,3,4\n");
  CHECK(cli({"score", "--geometry", (dir / "bad.csv").string(), "--out", (dir / "y.csv").string()}).code == 2);
}

TEST_CASE("synth, geometry, score, sweep, correlate pipeline is deterministic") {
  testutil::TempDir dir("cli_pipe");
  testutil::spit(dir / "spec.json", kSmallSpec);
  const std::string dump = (dir / "dump").string();
  REQUIRE(cli({"synth", "--spec", (dir / "spec.json").string(), "--out", dump}).code == 0);
  CHECK(fs::exists(dir / "dump" / "manifest.json"));

  auto pipeline = [&](const std::string& tag) {
    const std::string geo = (dir / (tag + "_geo.csv")).string(), sc = (dir / (tag + "_scores.csv")).string(),
                      loss = (dir / (tag + "_losses.csv")).string(), corr = (dir / (tag + "_corr.json")).string();
    REQUIRE(cli({"geometry", "--dump", dump, "--anchors", "64", "--pairs", "400", "--bootstrap", "50", "--out", geo})
                .code == 0);
    REQUIRE(cli({"score", "--geometry", geo, "--out", sc}).code == 0);
    REQUIRE(cli({"sweep", "--dump", dump, "--budget-steps", "100", "--width", "8", "--max-examples", "800", "--out",
                 loss})
                .code == 0);
    REQUIRE(cli({"correlate", "--scores", sc, "--losses", loss, "--out", corr}).code == 0);
    return std::vector<std::string>{testutil::slurp(geo), testutil::slurp(sc), testutil::slurp(loss),
                                    testutil::slurp(corr)};
  };
  const auto a = pipeline("a");
  const auto b = pipeline("b");
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  const CsvTable geo = read_csv(dir / "a_geo.csv");
  CHECK(geo.rows.size() == 4);
  for (const auto& row : geo.rows) {
    if (row[geo.column("layer")] == "0") CHECK(std::abs(std::stod(row[geo.column("k_eff")]) - 2.0) < 0.3);
  }
  const CsvTable scores = read_csv(dir / "a_scores.csv");
  CHECK(scores.rows.size() == 3);
  CHECK(fs::exists(dir / "a_geo.json"));
  CHECK(fs::exists(dir / "a_losses.json"));

  const Run sens = cli({"sensitivity", "--geometry", (dir / "a_geo.csv").string(), "--losses",
                        (dir / "a_losses.csv").string(), "--out", (dir / "sens.csv").string()});
  REQUIRE(sens.code == 0);
  const CsvTable s = read_csv(dir / "sens.csv");
  CHECK(s.rows.size() == 10);
  for (const char* col : {"preset", "alpha1", "alpha2", "alpha3", "alpha4", "selected_layer", "spearman"}) {
    CHECK(s.has_column(col));
  }
}

TEST_CASE("experiment writes the full report") {
  testutil::TempDir dir("cli_exp");
  testutil::spit(dir / "spec.json", kSmallSpec);
  const Run r = cli({"experiment", "--spec", (dir / "spec.json").string(), "--out", (dir / "run").string(), "--plot"});
  REQUIRE(r.code == 0);
  for (const char* f : {"geometry.csv", "geometry.json", "scores.csv", "scores.json", "losses.csv", "losses.json",
                        "report.json", "report.txt", "config.json", "geometry_plot.dat", "score_loss_plot.dat"}) {
    CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
  }
  const Json rep = read_json(dir / "run" / "report.json");
  CHECK(rep["n_layers"] == 3);

  // The resolved spec in the config echo reproduces the run on its own.
  write_json(read_json(dir / "run" / "config.json")["resolved"], dir / "echo.json");
  REQUIRE(cli({"experiment", "--spec", (dir / "echo.json").string(), "--out", (dir / "rerun").string()}).code == 0);
  for (const char* f : {"geometry.csv", "scores.json", "losses.csv", "report.json"}) {
    CHECK(testutil::slurp(dir / "run" / f) == testutil::slurp(dir / "rerun" / f));
  }

  testutil::spit(dir / "bad.json", R"({"layers": [{"ambient_dim": 4, "colour": 1}]})");
  const Run bad = cli({"experiment", "--spec", (dir / "bad.json").string(), "--out", (dir / "x").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("colour") != std::string::npos);
}

TEST_CASE("simulate checks") {
  testutil::TempDir dir("cli_sim");
  const std::string out = (dir / "sim.json").string();
  const Run r = cli({"simulate", "--check", "contraction", "--particles", "20000", "--out", out, "--plot"});
  REQUIRE(r.code == 0);
  const Json j = read_json(out);
  CHECK(j["passed"] == true);
  CHECK(fs::exists(dir / "sim_w2.csv"));
  CHECK(fs::exists(dir / "sim_w2_plot.dat"));

  const Run mono = cli({"simulate", "--check", "monotonicity", "--pairs", "1000", "--out", (dir / "m.json").string()});
  CHECK(mono.code == 0);
  const Run conc = cli({"simulate", "--check", "concentration", "--samples", "100000", "--out",
                        (dir / "c.json").string()});
  CHECK(conc.code == 0);
  const Json c = read_json(dir / "c.json");
  CHECK(c["checks"][0].contains("heavy_tail_control"));

  // A step size past the stability limit is a runtime error, not a failed check.
  CHECK(cli({"simulate", "--check", "contraction", "--dt", "0.6", "--out", (dir / "d.json").string()}).code == 2);
  CHECK(cli({"simulate", "--check", "nope"}).code == 2);
}
