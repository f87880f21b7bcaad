#include "layergeo/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "layergeo/stats.hpp"

namespace layergeo {

namespace {

void check_inputs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlation inputs differ in length");
  if (a.size() < 2) throw std::invalid_argument("correlation needs at least two observations");
}

// Number of tied pairs within runs of equal values in a sorted sequence.
template <typename Eq>
std::uint64_t tied_pairs(const std::vector<std::size_t>& order, Eq equal) {
  std::uint64_t ties = 0, run = 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (equal(order[i - 1], order[i])) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties + run * (run - 1) / 2;
}

// Merge sort of `idx` by key, returning the number of inversions.
std::uint64_t sort_count_swaps(std::vector<std::size_t>& idx, std::span<const double> key) {
  std::uint64_t swaps = 0;
  std::vector<std::size_t> buf(idx.size());
  for (std::size_t width = 1; width < idx.size(); width *= 2) {
    for (std::size_t lo = 0; lo < idx.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, idx.size());
      const std::size_t hi = std::min(lo + 2 * width, idx.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (key[idx[j]] < key[idx[i]]) {
          swaps += mid - i;
          buf[k++] = idx[j++];
        } else {
          buf[k++] = idx[i++];
        }
      }
      while (i < mid) buf[k++] = idx[i++];
      while (j < hi) buf[k++] = idx[j++];
    }
    std::swap(idx, buf);
  }
  return swaps;
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw std::domain_error("correlation undefined: zero variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

double kendall(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const std::size_t n = a.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return a[x] < a[y] || (a[x] == a[y] && b[x] < b[y]);
  });
  const std::uint64_t ties_a = tied_pairs(idx, [&](std::size_t x, std::size_t y) { return a[x] == a[y]; });
  const std::uint64_t ties_ab =
      tied_pairs(idx, [&](std::size_t x, std::size_t y) { return a[x] == a[y] && b[x] == b[y]; });
  const std::uint64_t swaps = sort_count_swaps(idx, b);
  const std::uint64_t ties_b = tied_pairs(idx, [&](std::size_t x, std::size_t y) { return b[x] == b[y]; });

  const double total = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double denom_a = total - static_cast<double>(ties_a);
  const double denom_b = total - static_cast<double>(ties_b);
  if (denom_a <= 0.0 || denom_b <= 0.0) throw std::domain_error("correlation undefined: zero variance input");
  const double s = total - static_cast<double>(ties_a) - static_cast<double>(ties_b) + static_cast<double>(ties_ab) -
                   2.0 * static_cast<double>(swaps);
  return std::clamp(s / std::sqrt(denom_a * denom_b), -1.0, 1.0);
}

namespace {

template <typename F>
std::optional<double> defined(F&& f) {
  try {
    return f();
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

struct Aligned {
  std::vector<double> score;
  std::vector<double> neg_loss;
  std::vector<double> loss;
  std::vector<int> layers;
};

Aligned align(const ScoreTable& scores, std::span<const LayerLoss> losses) {
  std::map<int, double> by_layer;
  for (const auto& l : losses) {
    if (!by_layer.emplace(l.layer, l.val_loss).second) {
      throw std::invalid_argument("duplicate loss row for layer " + std::to_string(l.layer));
    }
  }
  Aligned out;
  for (const auto& r : scores.rows) {
    const auto it = by_layer.find(r.layer);
    if (it == by_layer.end()) throw std::invalid_argument("layer mismatch: no loss for layer " + std::to_string(r.layer));
    out.score.push_back(r.score);
    out.loss.push_back(it->second);
    out.neg_loss.push_back(-it->second);
    out.layers.push_back(r.layer);
    by_layer.erase(it);
  }
  for (const auto& [layer, loss] : by_layer) {
    if (std::find(scores.excluded_layers.begin(), scores.excluded_layers.end(), layer) == scores.excluded_layers.end()) {
      throw std::invalid_argument("layer mismatch: loss for unscored layer " + std::to_string(layer));
    }
  }
  if (out.layers.size() < 2) throw std::invalid_argument("agreement_report needs at least two layers");
  return out;
}

MeanStd summarize(const std::vector<double>& v) { return {mean(v), population_std(v)}; }

}  // namespace

CorrelationReport agreement_report(const ScoreTable& scores, std::span<const LayerLoss> losses,
                                   std::span<const ScoreTable> repeats) {
  const Aligned al = align(scores, losses);
  CorrelationReport rep;
  rep.n_layers = al.layers.size();
  rep.spearman = defined([&] { return spearman(al.score, al.neg_loss); });
  rep.kendall = defined([&] { return kendall(al.score, al.neg_loss); });
  rep.pearson = defined([&] { return pearson(al.score, al.neg_loss); });
  rep.best_predicted_layer = argmax_layer(scores.rows);

  std::size_t best_obs = 0;
  for (std::size_t i = 1; i < al.loss.size(); ++i) {
    if (al.loss[i] < al.loss[best_obs] || (al.loss[i] == al.loss[best_obs] && al.layers[i] < al.layers[best_obs])) {
      best_obs = i;
    }
  }
  rep.best_observed_layer = al.layers[best_obs];
  const auto pred_pos = static_cast<std::size_t>(
      std::find(al.layers.begin(), al.layers.end(), rep.best_predicted_layer) - al.layers.begin());
  rep.rank_gap = static_cast<std::size_t>(
      std::count_if(al.loss.begin(), al.loss.end(), [&](double l) { return l < al.loss[pred_pos]; }));

  if (!repeats.empty()) {
    std::vector<double> sp, kd, pe;
    for (const auto& table : repeats) {
      const Aligned r = align(table, losses);
      if (r.layers != al.layers) throw std::invalid_argument("repeat score table covers different layers");
      const auto s = defined([&] { return spearman(r.score, r.neg_loss); });
      const auto k = defined([&] { return kendall(r.score, r.neg_loss); });
      const auto p = defined([&] { return pearson(r.score, r.neg_loss); });
      if (!s || !k || !p) throw std::domain_error("repeat score table has undefined correlation");
      sp.push_back(*s);
      kd.push_back(*k);
      pe.push_back(*p);
    }
    rep.repeats = RepeatStats{repeats.size(), summarize(sp), summarize(kd), summarize(pe)};
  }
  return rep;
}

}  // namespace layergeo
