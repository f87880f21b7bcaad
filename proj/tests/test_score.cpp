#include <doctest.h>

#include <cmath>
#include <set>

#include "layergeo/score.hpp"

using namespace layergeo;

namespace {

std::vector<LayerStats> from_logs(const std::vector<std::array<double, 3>>& logs) {
  std::vector<LayerStats> out;
  int layer = 0;
  for (const auto& l : logs) out.push_back({layer++, std::exp(l[0]), std::exp(l[1]), std::exp(l[2])});
  return out;
}

// Layer 1 dominates both curvature proxies but also has the largest rank.
std::vector<LayerStats> adversarial() { return from_logs({{1, 1, 0}, {2, 2, 1.5}, {0, 0, 0.5}}); }

}  // namespace

TEST_CASE("zscore") {
  const std::vector<double> v{1, 2, 3};
  const auto z = zscore(v);
  CHECK(z[0] == doctest::Approx(-1.224744871391589));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.224744871391589));
  const std::vector<double> same{4, 4, 4};
  for (double x : zscore(same)) CHECK(x == 0.0);
  const std::vector<double> one{7};
  CHECK(zscore(one) == std::vector<double>{0.0});
}

TEST_CASE("built-in presets") {
  const auto& p = builtin_presets();
  REQUIRE(p.size() == 10);
  CHECK(p[0].name == "final");
  CHECK(p[0].alpha == std::array<double, 4>{1, 1, -1, 0});
  std::set<std::string> names;
  for (const auto& q : p) {
    names.insert(q.name);
    CHECK_NOTHROW(q.validate());
  }
  CHECK(names.size() == 10);
  CHECK(find_builtin_preset("k_lin_x1.5")->alpha == std::array<double, 4>{1, 1, -1.5, -0.5});
  CHECK(find_builtin_preset("k_sq_x2.0")->alpha[3] == -1.0);
  CHECK_FALSE(find_builtin_preset("nope"));
  CHECK_THROWS(ScorePreset{"zero", {0, 0, 0, 0}}.validate());
}

TEST_CASE("hand-computed scores decrease with depth") {
  const ScoreTable t = selection_score(from_logs({{1, 1, 0}, {0, 0, 1}, {-1, -1, 2}}), final_preset());
  REQUIRE(t.rows.size() == 3);
  const double z = 1.224744871391589;
  CHECK(t.rows[0].score == doctest::Approx(3 * z));
  CHECK(t.rows[1].score == doctest::Approx(0.0));
  CHECK(t.rows[2].score == doctest::Approx(-3 * z));
  CHECK(t.selected_layer == 0);
  for (const auto& r : t.rows) CHECK(r.predicted_loss == -r.score);
}

TEST_CASE("all-equal layers select the lowest included index") {
  std::vector<LayerStats> s{{-1, 2, 3, 4}, {0, 2, 3, 4}, {1, 2, 3, 4}, {2, 2, 3, 4}};
  const std::vector<int> exclude{-1};
  const ScoreTable t = selection_score(s, final_preset(), exclude);
  CHECK(t.selected_layer == 0);
  CHECK(t.rows.size() == 3);
  for (const auto& r : t.rows) CHECK(r.score == 0.0);
  CHECK(t.excluded_layers == exclude);
  CHECK(selection_score(s, final_preset()).selected_layer == -1);
}

TEST_CASE("per-metric positive rescaling leaves the table unchanged") {
  const auto base = from_logs({{0.3, 1.2, 0.1}, {1.1, -0.4, 0.9}, {-0.2, 0.5, 1.7}, {0.8, 0.8, 0.2}});
  for (const auto& preset : builtin_presets()) {
    const ScoreTable ref = selection_score(base, preset);
    for (int metric = 0; metric < 3; ++metric) {
      // The quadratic term is not shift invariant in log k, so k rescaling
      // is only an invariance when alpha4 is zero.
      if (metric == 2 && preset.alpha[3] != 0.0) continue;
      auto scaled = base;
      for (auto& s : scaled) (metric == 0 ? s.m_curv : metric == 1 ? s.m_mono : s.k_eff) *= 17.5;
      const ScoreTable t = selection_score(scaled, preset);
      CHECK(t.selected_layer == ref.selected_layer);
      for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(std::abs(t.rows[i].score - ref.rows[i].score) < 1e-10);
    }
  }
}

TEST_CASE("z preserves raw ordering and predicted loss reverses score order") {
  const auto s = from_logs({{0.3, 1.2, 0.1}, {1.1, -0.4, 0.9}, {-0.2, 0.5, 1.7}});
  const ScoreTable t = selection_score(s, final_preset());
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (s[i].m_curv < s[j].m_curv) CHECK(t.rows[i].z_curv < t.rows[j].z_curv);
      if (t.rows[i].score < t.rows[j].score) CHECK(t.rows[i].predicted_loss > t.rows[j].predicted_loss);
    }
  }
}

TEST_CASE("non-positive proxies are rejected") {
  std::vector<LayerStats> s{{0, 1, 1, 1}, {1, 0, 1, 1}};
  CHECK_THROWS_AS(selection_score(s, final_preset()), std::domain_error);
}

TEST_CASE("stronger rank penalties flip the adversarial selection") {
  const auto s = adversarial();
  CHECK(selection_score(s, final_preset()).selected_layer == 1);
  CHECK(selection_score(s, *find_builtin_preset("k_lin_x1.5")).selected_layer == 0);
  CHECK(selection_score(s, *find_builtin_preset("baseline_k2")).selected_layer == 0);
}

TEST_CASE("only the strengthened rank penalties move the baseline selection") {
  const auto s = from_logs({{1, 1, 0.5}, {0.5, 0.5, 0}, {0.5, 1, 0.5}});
  CHECK(selection_score(s, *find_builtin_preset("baseline_k2")).selected_layer == 0);
  for (const auto& p : builtin_presets()) {
    const int expected = (p.name == "k_lin_x1.5" || p.name == "k_sq_x2.0") ? 1 : 0;
    CHECK_MESSAGE(selection_score(s, p).selected_layer == expected, p.name);
  }
}

TEST_CASE("sensitivity sweep") {
  const auto s = from_logs({{1, 1, 0}, {0, 0, 1}, {-1, -1, 2}, {-2, -1.5, 2.5}});
  const std::vector<ScorePreset> only_final{final_preset()};
  std::vector<LayerLoss> aligned{{0, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.4}};
  auto rows = sensitivity_sweep(s, only_final, {}, std::span<const LayerLoss>(aligned));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].selected_layer == 0);
  CHECK(*rows[0].oracle_layer == 0);
  CHECK(*rows[0].gap == 0.0);
  CHECK(*rows[0].spearman == doctest::Approx(1.0));

  std::vector<LayerLoss> reversed{{0, 0.4}, {1, 0.3}, {2, 0.2}, {3, 0.1}};
  rows = sensitivity_sweep(s, only_final, {}, std::span<const LayerLoss>(reversed));
  CHECK(*rows[0].spearman == doctest::Approx(-1.0));
  CHECK(*rows[0].gap == doctest::Approx(0.3));
  CHECK(*rows[0].selected_loss == doctest::Approx(0.4));

  rows = sensitivity_sweep(s, builtin_presets(), {}, std::nullopt);
  CHECK(rows.size() == 10);
  CHECK_FALSE(rows[0].gap);
  CHECK_FALSE(rows[0].spearman);

  std::vector<LayerLoss> missing{{0, 0.1}, {1, 0.2}};
  CHECK_THROWS(sensitivity_sweep(s, only_final, {}, std::span<const LayerLoss>(missing)));
}
