#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "kae/data.hpp"
#include "kae/model.hpp"

namespace kae {

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  // Periodic checkpoint every n epochs; 0 disables.
  std::size_t checkpoint_interval = 0;
  bool shuffle = true;

  void validate() const;
};

// Adam moments, one buffer per parameter tensor in ModelParams::named() order.
struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const std::vector<Tensor>& params);
};

// Bias-corrected Adam update of every tensor in `params` from its grad.
// Throws Error if a parameter has no gradient buffer or shapes mismatch.
void adam_step(std::vector<Tensor>& params, OptimizerState& state, const TrainConfig& config);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_chamfer = 0.0;
  double mean_aux = 0.0;
  double mean_total = 0.0;
};

struct StepInfo {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double chamfer = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

// Everything needed to continue training exactly where it stopped.
struct TrainState {
  KaeConfig model;
  ModelParams params;
  OptimizerState optimizer;
  std::size_t epochs_completed = 0;
  std::vector<EpochStats> history;
};

struct TrainHooks {
  std::function<void(const StepInfo&)> on_step;
  // Called after each epoch with the up-to-date state.
  std::function<void(const TrainState&)> on_epoch_end;
};

// Fresh state: seeded params and zero moments.
TrainState start_training(const KaeConfig& model, const TrainConfig& config);

// Runs epochs epochs_completed+1 .. config.epochs with per-sample updates.
// Epoch e visits samples in an order drawn from (seed, e) alone, so a resumed
// state continues identically to an uninterrupted run.
void continue_training(TrainState& state, const Dataset& data, const TrainConfig& config,
                       const TrainHooks& hooks = {});

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

TrainResult train(const Dataset& data, const KaeConfig& model, const TrainConfig& config,
                  const TrainHooks& hooks = {});

// "epoch,mean_chamfer,mean_aux,mean_total" header plus one row per epoch.
void write_loss_csv(const std::vector<EpochStats>& history, std::ostream& out);

}  // namespace kae
