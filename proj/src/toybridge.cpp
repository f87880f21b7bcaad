#include "layergeo/toybridge.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "layergeo/kernels.hpp"
#include "layergeo/rng.hpp"

namespace layergeo {

namespace {

struct Standardizer {
  Vector mean, scale;
};

Standardizer fit_standardizer(const RowMatrix& x, std::span<const std::size_t> rows) {
  const Eigen::Index d = x.cols();
  Standardizer s{Vector::Zero(d), Vector::Zero(d)};
  for (std::size_t r : rows) s.mean += x.row(static_cast<Eigen::Index>(r)).transpose();
  s.mean /= static_cast<double>(rows.size());
  for (std::size_t r : rows) s.scale += (x.row(static_cast<Eigen::Index>(r)).transpose() - s.mean).cwiseAbs2();
  s.scale = (s.scale / static_cast<double>(rows.size())).cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
  }
  return s;
}

RowMatrix apply_standardizer(const RowMatrix& x, std::span<const std::size_t> rows, const Standardizer& s) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        (x.row(static_cast<Eigen::Index>(rows[i])).transpose() - s.mean).cwiseQuotient(s.scale).transpose();
  }
  return out;
}

RowMatrix gaussian_block(Eigen::Index rows, Eigen::Index cols, Engine& engine) {
  std::normal_distribution<double> normal;
  RowMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(engine);
  }
  return out;
}

struct Activations {
  RowMatrix u, hu, hc;
};

// Standardised prediction for a batch sharing one noise scale.
RowMatrix forward(const BridgeModel& m, const RowMatrix& c, const RowMatrix& x, double s, Activations* act) {
  const Eigen::Index b = c.rows();
  RowMatrix u(b, x.cols() + c.cols() + 1);
  u << x, c, RowMatrix::Constant(b, 1, s);
  RowMatrix hu = ((u * m.w1.transpose()).rowwise() + m.b1.transpose()).array().tanh().matrix();
  RowMatrix hc = ((c * m.wh.transpose()).rowwise() + m.bh.transpose()).array().tanh().matrix();
  const RowMatrix mean = ((hc * m.wm.transpose()).rowwise() + m.bm.transpose()) + c * m.wc.transpose();
  const RowMatrix corr = (hu * m.w2.transpose()).rowwise() + m.b2.transpose();
  const double rho = std::sqrt(std::max(0.0, 1.0 - s * s));
  RowMatrix y = rho * x + (s * s) * mean + (rho * s) * corr;
  if (act != nullptr) *act = {std::move(u), std::move(hu), std::move(hc)};
  return y;
}

// Reconstruction MSE at s = 1 in original target units.
double eval_loss(const BridgeModel& m, const RowMatrix& c, const RowMatrix& y, const RowMatrix& noise) {
  const RowMatrix pred = forward(m, c, noise, 1.0, nullptr);
  const RowMatrix err = (pred - y) * m.target_scale.asDiagonal();
  return err.squaredNorm() / static_cast<double>(err.size());
}

}  // namespace

void BridgeConfig::validate() const {
  if (hidden_width == 0) throw std::invalid_argument("bridge: hidden_width must be positive");
  if (batch == 0) throw std::invalid_argument("bridge: batch must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("bridge: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("bridge: momentum must lie in [0, 1)");
  if (noise_schedule.empty()) throw std::invalid_argument("bridge: noise schedule is empty");
  for (double s : noise_schedule) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("bridge: noise scales must lie in (0, 1]");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("bridge: split fraction must lie in (0, 1)");
  if (max_examples < 10) throw std::invalid_argument("bridge: max_examples must be at least 10");
}

std::string BridgeConfig::fingerprint() const {
  nlohmann::ordered_json j;
  j["hidden_width"] = hidden_width;
  j["train_steps"] = train_steps;
  j["batch"] = batch;
  j["lr"] = lr;
  j["momentum"] = momentum;
  j["noise_schedule"] = noise_schedule;
  j["seed"] = seed;
  j["train_fraction"] = train_fraction;
  j["split_seed"] = split_seed;
  j["max_examples"] = max_examples;
  return j.dump();
}

RowMatrix BridgeModel::predict(const RowMatrix& condition, const RowMatrix& noisy, double noise) const {
  RowMatrix c(condition.rows(), condition.cols());
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    c.row(i) = (condition.row(i).transpose() - cond_mean).cwiseQuotient(cond_scale).transpose();
  }
  RowMatrix y = forward(*this, c, noisy, noise, nullptr) * target_scale.asDiagonal();
  y.rowwise() += target_mean.transpose();
  return y;
}

TrainedBridge train_bridge(const RowMatrix& condition, const RowMatrix& target, std::span<const std::size_t> groups,
                           const BridgeConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(condition.rows());
  if (n < 10) throw std::invalid_argument("train_bridge: need at least 10 examples");
  if (static_cast<std::size_t>(target.rows()) != n || groups.size() != n) {
    throw std::invalid_argument("train_bridge: condition, target and groups disagree on row count");
  }
  if (condition.cols() == 0 || target.cols() == 0) throw std::invalid_argument("train_bridge: empty feature dimension");

  // Group-level split: shuffle distinct group ids with the split seed.
  std::vector<std::size_t> ids(groups.begin(), groups.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw std::invalid_argument("train_bridge: need at least two groups to split");
  Engine split_engine = make_engine(cfg.split_seed, Stream::split);
  std::shuffle(ids.begin(), ids.end(), split_engine);
  auto n_train_groups = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(ids.size())));
  n_train_groups = std::clamp<std::size_t>(n_train_groups, 1, ids.size() - 1);
  std::vector<std::size_t> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train_groups));
  std::sort(train_ids.begin(), train_ids.end());
  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t r = 0; r < n; ++r) {
    (std::binary_search(train_ids.begin(), train_ids.end(), groups[r]) ? train_rows : val_rows).push_back(r);
  }

  TrainedBridge out;
  BridgeModel& m = out.model;
  const Standardizer cs = fit_standardizer(condition, train_rows);
  const Standardizer ts = fit_standardizer(target, train_rows);
  m.cond_mean = cs.mean;
  m.cond_scale = cs.scale;
  m.target_mean = ts.mean;
  m.target_scale = ts.scale;
  const RowMatrix c_train = apply_standardizer(condition, train_rows, cs);
  const RowMatrix y_train = apply_standardizer(target, train_rows, ts);
  const RowMatrix c_val = apply_standardizer(condition, val_rows, cs);
  const RowMatrix y_val = apply_standardizer(target, val_rows, ts);

  const Eigen::Index dc = condition.cols(), dt = target.cols();
  const auto width = static_cast<Eigen::Index>(cfg.hidden_width);
  const Eigen::Index in = dt + dc + 1;
  Engine engine = make_engine(cfg.seed, Stream::bridge, 0);
  m.w1 = gaussian_block(width, in, engine) / std::sqrt(static_cast<double>(in));
  m.b1 = Vector::Zero(width);
  m.w2 = gaussian_block(dt, width, engine) * (0.1 / std::sqrt(static_cast<double>(width)));
  m.b2 = Vector::Zero(dt);
  m.wh = gaussian_block(width, dc, engine) / std::sqrt(static_cast<double>(dc));
  m.bh = Vector::Zero(width);
  m.wm = gaussian_block(dt, width, engine) * (0.1 / std::sqrt(static_cast<double>(width)));
  m.bm = Vector::Zero(dt);
  m.wc = Matrix::Zero(dt, dc);

  Engine eval_engine = make_engine(cfg.seed, Stream::bridge, 1);
  const RowMatrix val_noise = gaussian_block(c_val.rows(), dt, eval_engine);
  const RowMatrix train_noise = gaussian_block(c_train.rows(), dt, eval_engine);

  BridgeLosses& losses = out.losses;
  losses.n_train = train_rows.size();
  losses.n_val = val_rows.size();
  losses.steps = cfg.train_steps;
  {
    Standardizer vs = fit_standardizer(target, val_rows);
    losses.target_variance = vs.scale.cwiseAbs2().mean();
  }
  losses.init_val_loss = eval_loss(m, c_val, y_val, val_noise);

  // Momentum buffers, one per parameter block.
  BridgeModel vel;
  vel.w1 = Matrix::Zero(width, in);
  vel.b1 = Vector::Zero(width);
  vel.w2 = Matrix::Zero(dt, width);
  vel.b2 = Vector::Zero(dt);
  vel.wh = Matrix::Zero(width, dc);
  vel.bh = Vector::Zero(width);
  vel.wm = Matrix::Zero(dt, width);
  vel.bm = Vector::Zero(dt);
  vel.wc = Matrix::Zero(dt, dc);
  auto step_block = [&](auto& param, auto& v, const auto& grad) {
    v = cfg.momentum * v - cfg.lr * grad;
    param += v;
  };

  std::uniform_int_distribution<std::size_t> pick(0, train_rows.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_noise(0, cfg.noise_schedule.size() - 1);
  const auto b = static_cast<Eigen::Index>(cfg.batch);
  RowMatrix cb(b, dc), yb(b, dt);
  Activations act;
  for (std::size_t step = 0; step < cfg.train_steps; ++step) {
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto r = static_cast<Eigen::Index>(pick(engine));
      cb.row(i) = c_train.row(r);
      yb.row(i) = y_train.row(r);
    }
    const double s = cfg.noise_schedule[pick_noise(engine)];
    const double rho = std::sqrt(std::max(0.0, 1.0 - s * s));
    const RowMatrix xi = gaussian_block(b, dt, engine);
    const RowMatrix xb = rho * yb + s * xi;
    const RowMatrix pred = forward(m, cb, xb, s, &act);
    const RowMatrix err = pred - yb;
    const double loss = err.squaredNorm() / static_cast<double>(err.size());
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "bridge training produced a non-finite loss at step " << step << " (lr=" << cfg.lr << "); lower lr";
      throw std::runtime_error(msg.str());
    }
    // Gradients of the batch-mean squared error through each head.
    const RowMatrix d_pred = err * (2.0 / static_cast<double>(err.size()));
    const RowMatrix d_mean = (s * s) * d_pred;
    const RowMatrix d_corr = (rho * s) * d_pred;
    const RowMatrix d_hu = ((d_corr * m.w2).array() * (1.0 - act.hu.array().square())).matrix();
    const RowMatrix d_hc = ((d_mean * m.wm).array() * (1.0 - act.hc.array().square())).matrix();
    step_block(m.w2, vel.w2, d_corr.transpose() * act.hu);
    step_block(m.b2, vel.b2, d_corr.colwise().sum().transpose());
    step_block(m.w1, vel.w1, d_hu.transpose() * act.u);
    step_block(m.b1, vel.b1, d_hu.colwise().sum().transpose());
    step_block(m.wm, vel.wm, d_mean.transpose() * act.hc);
    step_block(m.bm, vel.bm, d_mean.colwise().sum().transpose());
    step_block(m.wc, vel.wc, d_mean.transpose() * cb);
    step_block(m.wh, vel.wh, d_hc.transpose() * cb);
    step_block(m.bh, vel.bh, d_hc.colwise().sum().transpose());
  }

  losses.val_loss = eval_loss(m, c_val, y_val, val_noise);
  losses.train_loss = eval_loss(m, c_train, y_train, train_noise);
  if (!std::isfinite(losses.val_loss) || !std::isfinite(losses.train_loss)) {
    throw std::runtime_error("bridge training produced a non-finite evaluation loss; lower lr");
  }
  return out;
}

TrainedBridge train_bridge(const RowMatrix& condition, const RowMatrix& target, const BridgeConfig& cfg) {
  std::vector<std::size_t> groups(static_cast<std::size_t>(condition.rows()));
  std::iota(groups.begin(), groups.end(), std::size_t{0});
  return train_bridge(condition, target, groups, cfg);
}

std::vector<LayerLoss> SweepResult::losses() const {
  std::vector<LayerLoss> out;
  for (const auto& l : layers) out.push_back({l.layer, l.losses.val_loss, l.losses.train_loss});
  return out;
}

void verify_budget(const SweepResult& sweep) {
  const std::string expected = sweep.config.fingerprint();
  for (const auto& l : sweep.layers) {
    if (l.config_fingerprint != expected) {
      throw std::logic_error("budget mismatch: layer " + std::to_string(l.layer) + " trained under a different config");
    }
  }
}

TokenRows token_rows(const Tensor3& acts, const Mask& mask, std::size_t max_examples) {
  if (acts.n_seqs != mask.n_seqs || acts.seq_len != mask.seq_len) {
    throw std::invalid_argument("token_rows: mask shape does not match activations");
  }
  std::size_t total = 0, seqs = 0;
  for (; seqs < acts.n_seqs; ++seqs) {
    const std::size_t v = mask.valid_count(seqs);
    if (seqs > 0 && total + v > max_examples) break;
    total += v;
  }
  TokenRows out{RowMatrix(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(acts.hidden)), {}};
  out.groups.reserve(total);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < seqs; ++i) {
    for (std::size_t t = 0; t < acts.seq_len; ++t) {
      if (!mask.at(i, t)) continue;
      for (std::size_t k = 0; k < acts.hidden; ++k) out.x(row, static_cast<Eigen::Index>(k)) = acts.at(i, t, k);
      out.groups.push_back(i);
      ++row;
    }
  }
  return out;
}

SweepResult fixed_budget_sweep(const DumpManifest& dump, const BridgeConfig& cfg) {
  cfg.validate();
  const std::vector<int> all = dump.layers();
  if (all.empty() || all.front() != -1) throw std::invalid_argument("fixed_budget_sweep: dump has no embedding layer");
  std::vector<int> targets(all.begin() + 1, all.end());
  if (targets.size() < 2) throw std::invalid_argument("fixed_budget_sweep: need at least two target layers");

  const Mask mask = load_mask(dump);
  const TokenRows cond = token_rows(load_layer(dump, -1), mask, cfg.max_examples);

  SweepResult result;
  result.config = cfg;
  result.layers.resize(targets.size());
  std::vector<std::exception_ptr> errors(targets.size());
  const std::string fp = cfg.fingerprint();
#pragma omp parallel for schedule(dynamic) num_threads(kernels::thread_count())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(targets.size()); ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      const TokenRows tgt = token_rows(load_layer(dump, targets[u]), mask, cfg.max_examples);
      const TrainedBridge trained = train_bridge(cond.x, tgt.x, cond.groups, cfg);
      result.layers[u] = {targets[u], trained.losses, fp};
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  verify_budget(result);
  return result;
}

ExperimentResult end_to_end_experiment(std::span<const SynthLayerSpec> layers, const ExperimentConfig& cfg,
                                       const fs::path& workdir) {
  ExperimentResult out;
  out.dump = gen_pseudo_dump(layers, cfg.dump, workdir);
  out.geometry = profile_layers(out.dump, cfg.extract, cfg.proxy);
  const std::vector<LayerStats> stats = stats_of(out.geometry);
  out.scores = selection_score(stats, cfg.preset, cfg.exclude_layers);
  out.sweep = fixed_budget_sweep(out.dump, cfg.bridge);
  const std::vector<LayerLoss> losses = out.sweep.losses();
  out.report = agreement_report(out.scores, losses);
  return out;
}

}  // namespace layergeo
