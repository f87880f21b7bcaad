#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "layergeo/correlate.hpp"
#include "layergeo/dumpio.hpp"
#include "layergeo/extract.hpp"
#include "layergeo/geoproxy.hpp"
#include "layergeo/score.hpp"
#include "layergeo/synth.hpp"
#include "layergeo/types.hpp"

namespace layergeo {

struct BridgeConfig {
  std::size_t hidden_width = 32;
  std::size_t train_steps = 1500;  // the fixed budget
  std::size_t batch = 32;
  double lr = 0.02;
  double momentum = 0.9;
  std::vector<double> noise_schedule{1.0, 0.75, 0.5, 0.25};
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  std::uint64_t split_seed = 42;
  std::size_t max_examples = 20000;

  void validate() const;
  /// Canonical text of every field; equal configs give equal strings.
  std::string fingerprint() const;
};

/// Denoiser in standardised units. With ρ = sqrt(1 - s²) and u = [x, c, s]:
///   ŷ = ρ·x + s²·M(c) + ρ·s·D(u)
///   M(c) = Wc·c + Wm·tanh(Wh·c + bh) + bm,  D(u) = W2·tanh(W1·u + b1) + b2
/// ρ·x + s²·M is the posterior mean of a unit-variance Gaussian target
/// centred at M, and D corrects it at partial noise. At s = 1 the noisy
/// input carries no target signal and ŷ = M(c).
struct BridgeModel {
  Matrix w1, w2;
  Vector b1, b2;
  Matrix wh, wm, wc;
  Vector bh, bm;
  Vector cond_mean, cond_scale, target_mean, target_scale;

  /// Prediction in original target units for a noisy input given in
  /// standardised units.
  RowMatrix predict(const RowMatrix& condition, const RowMatrix& noisy, double noise) const;
};

struct BridgeLosses {
  double train_loss = 0.0;     // reconstruction MSE at s = 1, original units
  double val_loss = 0.0;
  double init_val_loss = 0.0;  // same protocol before any update
  double target_variance = 0.0;  // mean per-coordinate variance of the validation targets
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t steps = 0;
};

struct TrainedBridge {
  BridgeModel model;
  BridgeLosses losses;
};

/// Rows are split into train/validation by group; rows sharing a group id
/// land on the same side. Throws std::runtime_error on a non-finite loss.
TrainedBridge train_bridge(const RowMatrix& condition, const RowMatrix& target, std::span<const std::size_t> groups,
                           const BridgeConfig& cfg);
/// Every row is its own group.
TrainedBridge train_bridge(const RowMatrix& condition, const RowMatrix& target, const BridgeConfig& cfg);

struct LayerBridgeLoss {
  int layer = 0;
  BridgeLosses losses;
  std::string config_fingerprint;
};

struct SweepResult {
  BridgeConfig config;
  std::vector<LayerBridgeLoss> layers;  // ascending layer index, embedding excluded

  std::vector<LayerLoss> losses() const;
};

/// Throws std::logic_error if any layer was trained under a different config.
void verify_budget(const SweepResult& sweep);

/// Valid tokens in sequence order, whole sequences only, at most
/// `max_examples` rows (at least one sequence). groups[i] is the sequence.
struct TokenRows {
  RowMatrix x;
  std::vector<std::size_t> groups;
};
TokenRows token_rows(const Tensor3& acts, const Mask& mask, std::size_t max_examples);

/// Embedding output (layer -1) conditions a bridge for every decoder layer.
SweepResult fixed_budget_sweep(const DumpManifest& dump, const BridgeConfig& cfg);

struct ExperimentConfig {
  PseudoDumpConfig dump;
  ExtractConfig extract;
  ProxyConfig proxy;
  BridgeConfig bridge;
  ScorePreset preset = final_preset();
  std::vector<int> exclude_layers{-1};
};

struct ExperimentResult {
  DumpManifest dump;
  std::vector<LayerGeometry> geometry;
  ScoreTable scores;
  SweepResult sweep;
  CorrelationReport report;
};

/// pseudo-dump in `workdir` -> geometry -> score -> sweep -> correlation.
ExperimentResult end_to_end_experiment(std::span<const SynthLayerSpec> layers, const ExperimentConfig& cfg,
                                       const fs::path& workdir);

}  // namespace layergeo
