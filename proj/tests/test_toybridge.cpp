#include <doctest.h>

#include <cmath>
#include <limits>

#include "layergeo/toybridge.hpp"
#include "test_util.hpp"

using namespace layergeo;

namespace {

BridgeConfig quick_config() {
  BridgeConfig cfg;
  cfg.hidden_width = 16;
  cfg.train_steps = 600;
  cfg.max_examples = 4000;
  return cfg;
}

std::vector<SynthLayerSpec> three_layers() {
  std::vector<SynthLayerSpec> specs(3);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].ambient_dim = 8;
    specs[i].intrinsic_k = 2;
    specs[i].embed_rotation_seed = 100 + i;
    specs[i].off_manifold_noise = 0.05 * static_cast<double>(i);
    specs[i].condition_coupling = 1.0 - 0.3 * static_cast<double>(i);
  }
  return specs;
}

}  // namespace

TEST_CASE("config validation and fingerprint") {
  BridgeConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  BridgeConfig other = cfg;
  CHECK(cfg.fingerprint() == other.fingerprint());
  other.train_steps += 1;
  CHECK(cfg.fingerprint() != other.fingerprint());

  BridgeConfig bad = cfg;
  bad.lr = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.noise_schedule = {0.0};
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.momentum = 1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("identity task is learned from the condition") {
  const RowMatrix c = testutil::random_matrix(2000, 4, 1, 3.0);
  const TrainedBridge t = train_bridge(c, c, quick_config());
  CHECK(t.losses.target_variance == doctest::Approx(9.0).epsilon(0.15));
  CHECK(t.losses.val_loss < 0.01 * t.losses.target_variance);
  CHECK(t.losses.val_loss < t.losses.init_val_loss);
  CHECK(t.losses.n_train + t.losses.n_val == 2000);
}

TEST_CASE("pure noise target cannot beat its variance") {
  const RowMatrix c = testutil::random_matrix(3000, 4, 2);
  const RowMatrix y = testutil::random_matrix(3000, 3, 3, 2.0);
  const TrainedBridge t = train_bridge(c, y, quick_config());
  CHECK(std::abs(t.losses.val_loss / 4.0 - 1.0) < 0.15);
  CHECK(t.losses.val_loss >= 0.95 * t.losses.target_variance);
}

TEST_CASE("zero budget reports the initial loss and training is deterministic") {
  const RowMatrix c = testutil::random_matrix(500, 3, 4);
  RowMatrix y = c * 2.0;
  BridgeConfig cfg = quick_config();
  cfg.train_steps = 0;
  const TrainedBridge z = train_bridge(c, y, cfg);
  CHECK(z.losses.val_loss == z.losses.init_val_loss);
  CHECK(z.losses.steps == 0);

  cfg.train_steps = 200;
  const TrainedBridge a = train_bridge(c, y, cfg);
  const TrainedBridge b = train_bridge(c, y, cfg);
  CHECK(a.losses.val_loss == b.losses.val_loss);
  CHECK(a.model.w1 == b.model.w1);
  cfg.seed = 1;
  CHECK(train_bridge(c, y, cfg).losses.val_loss != a.losses.val_loss);
}

TEST_CASE("groups never straddle the split") {
  const RowMatrix c = testutil::random_matrix(400, 2, 5);
  std::vector<std::size_t> groups(400);
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = i / 8;
  const TrainedBridge t = train_bridge(c, c, groups, quick_config());
  CHECK(t.losses.n_val % 8 == 0);
  CHECK(t.losses.n_train % 8 == 0);
  CHECK(t.losses.n_val > 0);

  std::vector<std::size_t> one(400, 0);
  CHECK_THROWS(train_bridge(c, c, one, quick_config()));
  CHECK_THROWS(train_bridge(c, c, std::vector<std::size_t>(10, 0), quick_config()));
}

TEST_CASE("divergent learning rate is reported") {
  const RowMatrix c = testutil::random_matrix(500, 3, 6, 10.0);
  BridgeConfig cfg = quick_config();
  cfg.lr = 1e12;
  cfg.train_steps = 50;
  CHECK_THROWS_AS(train_bridge(c, c, cfg), std::runtime_error);
}

TEST_CASE("token rows keep whole sequences") {
  Tensor3 acts = testutil::random_tensor(4, 5, 2, 7);
  Mask mask(4, 5, 0);
  const std::size_t lens[] = {5, 3, 4, 2};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t t = 0; t < lens[i]; ++t) mask.at(i, t) = 1;
  }
  const TokenRows all = token_rows(acts, mask, 100);
  CHECK(all.x.rows() == 14);
  CHECK(all.groups.back() == 3);
  CHECK(all.x(5, 1) == acts.at(1, 0, 1));
  const TokenRows cut = token_rows(acts, mask, 10);
  CHECK(cut.x.rows() == 8);
  const TokenRows tiny = token_rows(acts, mask, 1);
  CHECK(tiny.x.rows() == 5);
}

TEST_CASE("fixed budget sweep") {
  testutil::TempDir dir("sweep");
  PseudoDumpConfig dc;
  dc.n_seqs = 200;
  dc.seed = 3;
  const DumpManifest dump = gen_pseudo_dump(three_layers(), dc, dir.path());
  const BridgeConfig cfg = quick_config();
  const SweepResult s = fixed_budget_sweep(dump, cfg);
  REQUIRE(s.layers.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s.layers[i].layer == static_cast<int>(i));
    CHECK(s.layers[i].config_fingerprint == cfg.fingerprint());
    CHECK(s.layers[i].losses.steps == cfg.train_steps);
  }
  CHECK_NOTHROW(verify_budget(s));
  CHECK(s.losses().size() == 3);
  // Weaker coupling to the embedding makes the layer harder to predict.
  const auto rel = [&](std::size_t i) { return s.layers[i].losses.val_loss / s.layers[i].losses.target_variance; };
  CHECK(rel(0) < rel(2));

  SweepResult tampered = s;
  tampered.layers[1].config_fingerprint = "other";
  CHECK_THROWS_AS(verify_budget(tampered), std::logic_error);

  const SweepResult again = fixed_budget_sweep(dump, cfg);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again.layers[i].losses.val_loss == s.layers[i].losses.val_loss);
}

TEST_CASE("more budget lowers loss on average") {
  const RowMatrix c = testutil::random_matrix(2000, 3, 8);
  RowMatrix y(2000, 2);
  for (Eigen::Index i = 0; i < 2000; ++i) {
    y(i, 0) = std::sin(c(i, 0)) + c(i, 1) * c(i, 2);
    y(i, 1) = std::tanh(c(i, 1) - c(i, 0));
  }
  double short_sum = 0.0, long_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    BridgeConfig cfg = quick_config();
    cfg.seed = seed;
    cfg.train_steps = 50;
    short_sum += train_bridge(c, y, cfg).losses.val_loss;
    cfg.train_steps = 1500;
    long_sum += train_bridge(c, y, cfg).losses.val_loss;
  }
  CHECK(long_sum < short_sum);
}
