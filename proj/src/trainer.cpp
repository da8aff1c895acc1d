#include "alignve/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace alignve {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd" || name == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ConfigError("decay factor must lie in (0, 1)");
  if (plateau_patience == 0) throw ConfigError("plateau patience must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

OptimizerState OptimizerState::create(OptimizerKind kind, const ParamStore<float>& params) {
  OptimizerState state;
  state.kind = kind;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first.emplace_back(params.at(i).size(), 0.0f);
    if (kind == OptimizerKind::adam) state.second.emplace_back(params.at(i).size(), 0.0f);
  }
  return state;
}

namespace {

void check_alignment(const ParamStore<float>& params, const GradientBuffers& grads, const GradientBuffers& state,
                     const char* what) {
  if (grads.size() != params.size() || state.size() != params.size()) {
    throw ShapeError(std::string(what) + ": gradient/state count does not match parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (grads[p].size() != params.at(p).size() || state[p].size() != params.at(p).size()) {
      throw ShapeError(std::string(what) + ": buffer shape mismatch for '" + params.name(p) + "'");
    }
  }
}

}  // namespace

void sgd_momentum_step(ParamStore<float>& params, const GradientBuffers& grads, OptimizerState& state, double lr,
                       double momentum) {
  check_alignment(params, grads, state.first, "sgd_momentum_step");
  const auto mu = static_cast<float>(momentum);
  const auto rate = static_cast<float>(lr);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params.at(p).data();
    auto& v = state.first[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = mu * v[i] + grads[p][i];
      theta[i] -= rate * v[i];
    }
  }
  ++state.step;
}

void adam_step(ParamStore<float>& params, const GradientBuffers& grads, OptimizerState& state, double lr,
               double beta1, double beta2, double eps) {
  check_alignment(params, grads, state.first, "adam_step");
  check_alignment(params, grads, state.second, "adam_step");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  const auto b1 = static_cast<float>(beta1), b2 = static_cast<float>(beta2);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params.at(p).data();
    auto& m = state.first[p];
    auto& v = state.second[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const float g = grads[p][i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] = static_cast<float>(theta[i] - lr * m_hat / (std::sqrt(v_hat) + eps));
    }
  }
}

double plateau_update(SchedulerState& state, double val_loss, std::size_t patience, double factor) {
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.epochs_since_improvement = 0;
  } else if (++state.epochs_since_improvement >= patience) {
    state.current_lr *= factor;
    state.epochs_since_improvement = 0;
  }
  return state.current_lr;
}

namespace {

struct ExampleOutcome {
  double loss = 0.0;
  std::size_t predicted = 0;
  GradientBuffers grads;
};

ExampleOutcome run_example(const ParamStore<float>& params, const Example& ex, const EmbeddingTable& table,
                           const ModelConfig& cfg, bool with_grad) {
  ExampleOutcome out;
  Tape<float> tape;
  const ParamSet<float> set = params.bind(with_grad ? &tape : nullptr);
  const auto result = forward_prepared(ex.premise, ex.tokens, table, ModelParams<float>::from(set, cfg), cfg);
  const auto logits = result.logits.data();
  out.predicted = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  const Tensor<float> loss = cross_entropy(result.logits, ex.label);
  out.loss = loss.item();
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss on example '" + ex.id + "'");
  if (with_grad) out.grads = set.gradients(tape.backward(loss));
  return out;
}

// Runs `fn(i)` for i in [0, count) on up to `threads` workers, in waves of
// `threads` consecutive indices; `consume(i, result)` is called in index order.
template <typename Fn, typename Consume>
void ordered_parallel(std::size_t count, std::size_t threads, Fn fn, Consume consume) {
  threads = std::max<std::size_t>(1, threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) consume(i, fn(i));
    return;
  }
  using Result = decltype(fn(std::size_t{0}));
  for (std::size_t begin = 0; begin < count; begin += threads) {
    const std::size_t end = std::min(count, begin + threads);
    std::vector<Result> results(end - begin);
    std::vector<std::exception_ptr> errors(end - begin);
    {
      std::vector<std::jthread> workers;
      for (std::size_t i = begin + 1; i < end; ++i) {
        workers.emplace_back([&, i] {
          try {
            results[i - begin] = fn(i);
          } catch (...) {
            errors[i - begin] = std::current_exception();
          }
        });
      }
      try {
        results[0] = fn(begin);
      } catch (...) {
        errors[0] = std::current_exception();
      }
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (errors[i - begin]) std::rethrow_exception(errors[i - begin]);
      consume(i, std::move(results[i - begin]));
    }
  }
}

}  // namespace

BatchGradients batch_gradients(const ParamStore<float>& params, std::span<const Example* const> batch,
                               const EmbeddingTable& table, const ModelConfig& cfg, std::size_t threads) {
  if (batch.empty()) throw DataError("empty batch");
  BatchGradients out;
  out.grads.reserve(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) out.grads.emplace_back(params.at(p).size(), 0.0f);

  double total = 0.0;
  ordered_parallel(
      batch.size(), threads, [&](std::size_t i) { return run_example(params, *batch[i], table, cfg, true); },
      [&](std::size_t, ExampleOutcome r) {
        total += r.loss;
        out.losses.push_back(r.loss);
        for (std::size_t p = 0; p < out.grads.size(); ++p) {
          auto& acc = out.grads[p];
          for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += r.grads[p][k];
        }
      });
  const auto n = static_cast<float>(batch.size());
  for (auto& g : out.grads)
    for (auto& v : g) v /= n;
  out.mean_loss = total / static_cast<double>(batch.size());
  return out;
}

EvalMetrics evaluate(const ParamStore<float>& params, const Dataset& data, const EmbeddingTable& table,
                     const ModelConfig& cfg, std::size_t threads) {
  validate_params(params, model_param_specs(cfg));
  EvalMetrics m;
  if (data.empty()) return m;
  double total = 0.0;
  std::size_t correct = 0;
  ordered_parallel(
      data.size(), threads, [&](std::size_t i) { return run_example(params, data.examples[i], table, cfg, false); },
      [&](std::size_t i, ExampleOutcome r) {
        total += r.loss;
        const std::size_t truth = data.examples[i].label;
        ++m.confusion[truth][r.predicted];
        if (truth == r.predicted) ++correct;
      });
  m.count = data.size();
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.count);
  m.mean_loss = total / static_cast<double>(m.count);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::size_t row = std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), std::size_t{0});
    m.per_class_accuracy[c] = row ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(row) : 0.0;
  }
  return m;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const EmbeddingTable& table, const TrainHooks& hooks) {
  cfg.validate();
  Rng rng(cfg.seed);
  Checkpoint start;
  start.params = init_model_params(cfg.model, rng);
  start.optimizer = OptimizerState::create(cfg.optimizer, start.params);
  start.scheduler.current_lr = cfg.lr;
  return train_from(cfg, std::move(start), train_set, val_set, table, rng, hooks);
}

TrainResult train_from(const TrainConfig& cfg, Checkpoint state, const Dataset& train_set, const Dataset& val_set,
                       const EmbeddingTable& table, Rng& rng, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (val_set.empty() && !hooks.validate) throw DataError("validation set is empty");
  validate_params(state.params, model_param_specs(cfg.model));
  if (state.optimizer.kind != cfg.optimizer) throw ConfigError("optimizer state does not match configured optimizer");

  TrainResult result;
  double best_accuracy = -1.0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Example*> batch;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.lr = state.scheduler.current_lr;

    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set.examples[order[i]]);
      BatchGradients bg;
      try {
        bg = batch_gradients(state.params, batch, table, cfg.model, cfg.threads);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      for (double l : bg.losses) loss_sum += l;
      if (cfg.optimizer == OptimizerKind::adam) {
        adam_step(state.params, bg.grads, state.optimizer, state.scheduler.current_lr, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);
      } else {
        sgd_momentum_step(state.params, bg.grads, state.optimizer, state.scheduler.current_lr, cfg.momentum);
      }
    }
    record.train_loss = loss_sum / static_cast<double>(order.size());

    const EvalMetrics val = hooks.validate ? hooks.validate(state.params, epoch)
                                           : evaluate(state.params, val_set, table, cfg.model, cfg.threads);
    if (!std::isfinite(val.mean_loss)) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": non-finite validation loss");
    }
    record.val_loss = val.mean_loss;
    record.val_accuracy = val.accuracy;
    plateau_update(state.scheduler, val.mean_loss, cfg.plateau_patience, cfg.decay_factor);

    result.history.push_back(record);
    if (val.accuracy > best_accuracy) {
      best_accuracy = val.accuracy;
      result.best_epoch = epoch;
      result.best = state;
    }
    if (hooks.on_epoch) hooks.on_epoch(record, state);
  }
  result.last = std::move(state);
  return result;
}

}  // namespace alignve
