#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "alignve/dataset.hpp"
#include "alignve/model.hpp"

namespace alignve {

enum class OptimizerKind : std::uint8_t { sgd_momentum = 0, adam = 1 };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  double lr = 1e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t plateau_patience = 2;
  double decay_factor = 0.1;
  std::uint64_t seed = 12345;
  // Per-example gradient workers; results are reduced in example order, so
  // any value gives bit-identical training.
  std::size_t threads = 1;
  ModelConfig model;

  void validate() const;
};

// Per-parameter buffers aligned with ParamStore order.
using GradientBuffers = std::vector<std::vector<float>>;

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  std::uint64_t step = 0;
  GradientBuffers first;   // SGD velocity, or Adam first moment
  GradientBuffers second;  // Adam second moment; empty for SGD

  static OptimizerState create(OptimizerKind kind, const ParamStore<float>& params);
};

struct SchedulerState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  double current_lr = 1e-4;
};

// v <- momentum * v + g;  theta <- theta - lr * v
void sgd_momentum_step(ParamStore<float>& params, const GradientBuffers& grads, OptimizerState& state, double lr,
                       double momentum = 0.9);

// Bias-corrected Adam update.
void adam_step(ParamStore<float>& params, const GradientBuffers& grads, OptimizerState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// A strictly lower validation loss resets the counter; otherwise the counter
// grows and, on reaching `patience`, the rate is multiplied by `factor` and
// the counter restarts. Returns the rate for the next epoch.
double plateau_update(SchedulerState& state, double val_loss, std::size_t patience = 2, double factor = 0.1);

struct BatchGradients {
  double mean_loss = 0.0;
  GradientBuffers grads;  // gradient of the mean loss
  std::vector<double> losses;
};

// Forward/backward per example, reduced in example order and divided by the
// batch size. Throws NumericalError on a non-finite loss.
BatchGradients batch_gradients(const ParamStore<float>& params, std::span<const Example* const> batch,
                               const EmbeddingTable& table, const ModelConfig& cfg, std::size_t threads = 1);

struct EvalMetrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::array<double, 3> per_class_accuracy{};
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
};

EvalMetrics evaluate(const ParamStore<float>& params, const Dataset& data, const EmbeddingTable& table,
                     const ModelConfig& cfg, std::size_t threads = 1);

struct Checkpoint {
  ParamStore<float> params;
  OptimizerState optimizer;
  SchedulerState scheduler;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;  // rate used during this epoch
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  Checkpoint best;
  Checkpoint last;
};

struct TrainHooks {
  // Called after every epoch with that epoch's state.
  std::function<void(const EpochRecord&, const Checkpoint&)> on_epoch;
  // Replaces validation on the validation set when set.
  std::function<EvalMetrics(const ParamStore<float>&, std::size_t epoch)> validate;
};

// Seeded init, per-epoch shuffle, batched optimizer steps, per-epoch
// validation and plateau decay; returns the checkpoint with the best
// validation accuracy (earliest epoch on ties).
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const EmbeddingTable& table, const TrainHooks& hooks = {});

// Continues from a given initial state instead of drawing fresh parameters.
TrainResult train_from(const TrainConfig& cfg, Checkpoint start, const Dataset& train_set, const Dataset& val_set,
                       const EmbeddingTable& table, Rng& rng, const TrainHooks& hooks = {});

}  // namespace alignve
