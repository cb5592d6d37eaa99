#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tsrp/checkpoint.hpp"
#include "tsrp/dataio.hpp"
#include "tsrp/forecaster.hpp"
#include "tsrp/metrics.hpp"

namespace tsrp {

struct TrainConfig {
  std::size_t max_epochs = 50;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  /// Global gradient-norm clip; 0 disables it.
  double clip_norm = 0.0;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;
  bool shuffle = true;
  /// Constant learning rate unless set: lr multiplier for (epoch, step).
  std::function<double(std::size_t epoch, std::size_t step)> lr_schedule;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool has_val = false;
  std::size_t steps = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  bool stopped_early = false;
};

/// (1/H)·Σ(y − ŷ)².
double mse_loss(std::span<const double> forecast, std::span<const double> target);

/// Minibatch Adam over the trainable modules only. With a validation set,
/// training stops once val loss has not improved for `patience` epochs and the
/// best parameters are restored. Throws ConfigError on an empty training set.
TrainHistory train(ModelState& state, const WindowSet& train_set, const WindowSet* val_set,
                   const TrainConfig& cfg, std::shared_ptr<PrefixCache> cache = nullptr,
                   const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean per-window loss in training space (standardized if enabled).
double loss_on(ModelState& state, const WindowSet& windows, std::shared_ptr<PrefixCache> cache = nullptr);

struct Evaluation {
  std::vector<double> truth;     // concatenated targets, window by window
  std::vector<double> forecast;  // matching forecasts
  MetricsReport metrics;
};

/// Forecasts every window and scores the concatenation in normalized power
/// units. Parameters are hashed before and after; any change is an error.
Evaluation evaluate(ModelState& state, const WindowSet& windows, std::shared_ptr<PrefixCache> cache = nullptr);

/// One optimizer step on a fixed batch; returns the batch loss before the step.
double train_step(ModelState& state, Forecaster& forecaster, const WindowSet& windows,
                  std::span<const std::size_t> batch, const TrainConfig& cfg, std::size_t epoch,
                  std::size_t step);

Checkpoint model_checkpoint(const ModelState& state);
void save_model(const std::filesystem::path& path, const ModelState& state);
/// Rebuilds the frozen backbone from the stored seed/config unless one is given.
ModelState load_model(const std::filesystem::path& path, std::shared_ptr<const Backbone> backbone = nullptr);
ModelState model_from_checkpoint(const Checkpoint& ckpt, std::shared_ptr<const Backbone> backbone = nullptr);

}  // namespace tsrp
