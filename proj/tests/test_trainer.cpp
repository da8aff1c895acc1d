#include <gtest/gtest.h>

#include <cmath>

#include "alignve/trainer.hpp"
#include "toy_fixture.hpp"

using namespace alignve;

namespace {

ParamStore<float> single_param(std::vector<float> values) {
  ParamStore<float> store;
  const std::size_t n = values.size();
  store.add("theta", Tensor<float>({n}, std::move(values)));
  return store;
}

// Small toy problem shared by the slower tests.
class ToyTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    toy_ = new ToyConfig;
    toy_->per_class = 40;
    splits_ = new fixture::ToySplits(fixture::load_toy(*toy_, fixture::scratch_dir("trainer")));
  }
  static void TearDownTestSuite() {
    delete splits_;
    delete toy_;
  }
  static TrainConfig config(std::size_t epochs) {
    TrainConfig cfg = fixture::toy_train_config(*toy_);
    cfg.max_epochs = epochs;
    cfg.batch_size = 16;
    return cfg;
  }
  static ToyConfig* toy_;
  static fixture::ToySplits* splits_;
};

ToyConfig* ToyTraining::toy_ = nullptr;
fixture::ToySplits* ToyTraining::splits_ = nullptr;

GradientBuffers reference_gradient(const ParamStore<float>& params, const Example& ex, const EmbeddingTable& table,
                                   const ModelConfig& cfg) {
  const auto store = params.cast<double>();
  Tape<double> tape;
  const auto set = store.bind(&tape);
  const auto r =
      forward_prepared(ex.premise.cast<double>(), ex.tokens, table, ModelParams<double>::from(set, cfg), cfg);
  const auto grads = set.gradients(tape.backward(cross_entropy(r.logits, ex.label)));
  GradientBuffers out;
  for (const auto& g : grads) out.emplace_back(g.begin(), g.end());
  return out;
}

}  // namespace

TEST(Sgd, MomentumAccumulatesVelocity) {
  auto params = single_param({1.0f, -2.0f});
  auto state = OptimizerState::create(OptimizerKind::sgd_momentum, params);
  sgd_momentum_step(params, {{0.5f, 1.0f}}, state, 0.1, 0.9);
  EXPECT_FLOAT_EQ(params.at(0)[0], 0.95f);
  EXPECT_FLOAT_EQ(params.at(0)[1], -2.1f);
  sgd_momentum_step(params, {{-1.0f, 2.0f}}, state, 0.1, 0.9);
  // v = 0.9 * g1 + g2
  EXPECT_FLOAT_EQ(state.first[0][0], 0.9f * 0.5f - 1.0f);
  EXPECT_FLOAT_EQ(state.first[0][1], 0.9f * 1.0f + 2.0f);
  EXPECT_NEAR(params.at(0)[0], 0.95 - 0.1 * (0.45 - 1.0), 1e-6);
  EXPECT_NEAR(params.at(0)[1], -2.1 - 0.1 * 2.9, 1e-6);
}

TEST(Sgd, ZeroLearningRateLeavesParameters) {
  auto params = single_param({3.0f});
  auto state = OptimizerState::create(OptimizerKind::sgd_momentum, params);
  for (int i = 0; i < 5; ++i) sgd_momentum_step(params, {{7.0f}}, state, 0.0, 0.9);
  EXPECT_EQ(params.at(0)[0], 3.0f);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto params = single_param({0.0f, 1.0f, -4.0f});
  auto state = OptimizerState::create(OptimizerKind::adam, params);
  adam_step(params, {{0.3f, -20.0f, 1e-3f}}, state, 1e-4);
  EXPECT_NEAR(params.at(0)[0], -1e-4, 1e-9);
  EXPECT_NEAR(params.at(0)[1], 1.0 + 1e-4, 1e-7);
  EXPECT_NEAR(params.at(0)[2], -4.0 - 1e-4 * (1e-3 / (1e-3 + 1e-8)), 1e-6);
}

TEST(Adam, ConstantGradientConvergesToLearningRatePerStep) {
  auto params = single_param({0.0f});
  auto state = OptimizerState::create(OptimizerKind::adam, params);
  float previous = 0.0f;
  for (int step = 1; step <= 200; ++step) {
    adam_step(params, {{2.5f}}, state, 1e-3);
    const float delta = params.at(0)[0] - previous;
    previous = params.at(0)[0];
    EXPECT_NEAR(delta, -1e-3, 1e-6) << "step " << step;
  }
}

TEST(Adam, ZeroGradientKeepsParameters) {
  auto params = single_param({0.25f, -7.5f});
  auto state = OptimizerState::create(OptimizerKind::adam, params);
  for (int i = 0; i < 10; ++i) adam_step(params, {{0.0f, 0.0f}}, state, 1e-2);
  EXPECT_EQ(params.at(0)[0], 0.25f);
  EXPECT_EQ(params.at(0)[1], -7.5f);
}

TEST(Optimizer, MisalignedGradientsRejected) {
  auto params = single_param({1.0f});
  auto state = OptimizerState::create(OptimizerKind::adam, params);
  EXPECT_THROW(adam_step(params, {{1.0f, 2.0f}}, state, 1e-3), ShapeError);
  EXPECT_THROW(adam_step(params, {}, state, 1e-3), ShapeError);
}

TEST(Plateau, DecaysAfterPatienceEpochsWithoutImprovement) {
  SchedulerState s;
  s.current_lr = 1e-4;
  const std::vector<double> losses{1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.85, 0.85};
  const std::vector<double> rates{1e-4, 1e-4, 1e-4, 1e-5, 1e-5, 1e-6, 1e-6, 1e-6};
  for (std::size_t i = 0; i < losses.size(); ++i) {
    EXPECT_DOUBLE_EQ(plateau_update(s, losses[i]), rates[i]) << "epoch " << i + 1;
  }
  EXPECT_EQ(s.best_val_loss, 0.85);
  EXPECT_EQ(s.epochs_since_improvement, 1u);
}

TEST(Plateau, ShortTraces) {
  auto decay_epochs = [](const std::vector<double>& losses) {
    SchedulerState s;
    s.current_lr = 1e-4;
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < losses.size(); ++e) {
      const double before = s.current_lr;
      if (plateau_update(s, losses[e]) < before) out.push_back(e + 1);
    }
    return out;
  };
  EXPECT_TRUE(decay_epochs({1.0, 0.9, 0.8}).empty());
  EXPECT_EQ(decay_epochs({1.0, 1.1, 1.2}), std::vector<std::size_t>{3});
  EXPECT_EQ(decay_epochs({1.0, 1.1, 0.9, 1.0, 1.1}), std::vector<std::size_t>{5});
}

TEST(Plateau, FlatLossDecaysGeometrically) {
  SchedulerState s;
  s.current_lr = 1e-4;
  plateau_update(s, 0.5);
  for (int k = 1; k <= 6; ++k) {
    plateau_update(s, 0.5);
    const double lr = plateau_update(s, 0.5);
    EXPECT_NEAR(lr, 1e-4 * std::pow(0.1, k), 1e-4 * std::pow(0.1, k) * 1e-12);
  }
}

TEST(Plateau, PatienceOneAndCustomFactor) {
  SchedulerState s;
  s.current_lr = 1.0;
  EXPECT_EQ(plateau_update(s, 2.0, 1, 0.5), 1.0);
  EXPECT_EQ(plateau_update(s, 2.0, 1, 0.5), 0.5);
  EXPECT_EQ(plateau_update(s, 3.0, 1, 0.5), 0.25);
  EXPECT_EQ(plateau_update(s, 1.0, 1, 0.5), 0.25);
}

TEST(TrainConfigValidation, RejectsBadValues) {
  auto bad = [](auto mutate) {
    TrainConfig cfg;
    mutate(cfg);
    return cfg;
  };
  EXPECT_NO_THROW(TrainConfig{}.validate());
  EXPECT_THROW(bad([](TrainConfig& c) { c.lr = -1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.decay_factor = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.threads = 0; }).validate(), ConfigError);
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::sgd_momentum);
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::adam);
  EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}

TEST_F(ToyTraining, EvaluationIsRepeatableAndConsistent) {
  const auto cfg = config(1);
  Rng rng(cfg.seed);
  const auto params = init_model_params(cfg.model, rng);
  const auto a = evaluate(params, splits_->val, splits_->table, cfg.model);
  const auto b = evaluate(params, splits_->val, splits_->table, cfg.model);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.mean_loss, b.mean_loss);
  EXPECT_EQ(a.count, splits_->val.size());
  const auto hist = splits_->val.class_histogram();
  std::size_t diagonal = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < 3; ++p) row += a.confusion[c][p];
    EXPECT_EQ(row, hist[c]);
    diagonal += a.confusion[c][c];
  }
  EXPECT_DOUBLE_EQ(a.accuracy, static_cast<double>(diagonal) / a.count);

  Dataset one;
  one.examples.push_back(splits_->val.examples[0]);
  const auto single = evaluate(params, one, splits_->table, cfg.model);
  EXPECT_TRUE(single.accuracy == 0.0 || single.accuracy == 1.0);
  const auto pred = forward_prepared(one.examples[0].premise, one.examples[0].tokens, splits_->table,
                                     ModelParams<float>::from(params.bind(nullptr), cfg.model), cfg.model);
  EXPECT_NEAR(single.mean_loss, cross_entropy(pred.logits, one.examples[0].label)[0], 1e-6);
}

TEST_F(ToyTraining, BatchGradientIsMeanOfExampleGradients) {
  auto cfg = config(1);
  Rng rng(cfg.seed);
  auto params = init_model_params(cfg.model, rng);
  const Example* batch[] = {&splits_->train.examples[0], &splits_->train.examples[1]};
  const auto bg = batch_gradients(params, batch, splits_->table, cfg.model);
  const auto ga = reference_gradient(params, *batch[0], splits_->table, cfg.model);
  const auto gb = reference_gradient(params, *batch[1], splits_->table, cfg.model);
  ASSERT_EQ(bg.losses.size(), 2u);
  EXPECT_NEAR(bg.mean_loss, (bg.losses[0] + bg.losses[1]) / 2, 1e-12);

  // One SGD step from rest moves every parameter by -lr * (ga + gb) / 2.
  const auto before = params;
  auto state = OptimizerState::create(OptimizerKind::sgd_momentum, params);
  sgd_momentum_step(params, bg.grads, state, 0.1, 0.9);
  double worst = 0;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params.at(p).size(); ++i) {
      const double want = before.at(p)[i] - 0.1 * (ga[p][i] + gb[p][i]) / 2;
      worst = std::max(worst, std::abs(params.at(p)[i] - want));
    }
  EXPECT_LT(worst, 1e-5);
}

TEST_F(ToyTraining, EmbeddingTableIsFrozen) {
  const std::vector<float> before(splits_->table.raw().begin(), splits_->table.raw().end());
  const auto cfg = config(2);
  const auto result = train(cfg, splits_->train, splits_->val, splits_->table);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), splits_->table.raw().begin()));
  for (const auto& name : result.last.params.names()) {
    EXPECT_TRUE(name.rfind("premise.", 0) == 0 || name.rfind("hypothesis.", 0) == 0 ||
                name.rfind("classifier.", 0) == 0)
        << name;
  }
}

TEST_F(ToyTraining, SameSeedAndAnyThreadCountGiveIdenticalRuns) {
  auto cfg = config(3);
  const auto a = train(cfg, splits_->train, splits_->val, splits_->table);
  cfg.threads = 4;
  const auto b = train(cfg, splits_->train, splits_->val, splits_->table);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_loss, b.history[e].val_loss);
  }
  for (std::size_t p = 0; p < a.last.params.size(); ++p)
    EXPECT_EQ(a.last.params.at(p).values(), b.last.params.at(p).values());

  cfg.seed += 1;
  const auto c = train(cfg, splits_->train, splits_->val, splits_->table);
  EXPECT_NE(a.history[0].train_loss, c.history[0].train_loss);
}

TEST_F(ToyTraining, TrainingLossMostlyDecreases) {
  const auto cfg = config(20);
  const auto result = train(cfg, splits_->train, splits_->val, splits_->table);
  std::size_t non_increasing = 0;
  for (std::size_t e = 1; e < result.history.size(); ++e)
    if (result.history[e].train_loss <= result.history[e - 1].train_loss) ++non_increasing;
  EXPECT_GE(non_increasing, 0.9 * (result.history.size() - 1));
  EXPECT_LT(result.history.back().train_loss, result.history.front().train_loss);
}

TEST_F(ToyTraining, BestCheckpointFollowsValidationAccuracy) {
  const auto cfg = config(3);
  const std::vector<double> accuracy{0.5, 0.8, 0.7};
  std::vector<ParamStore<float>> snapshots;
  TrainHooks hooks;
  hooks.validate = [&](const ParamStore<float>&, std::size_t epoch) {
    EvalMetrics m;
    m.count = 1;
    m.accuracy = accuracy[epoch - 1];
    m.mean_loss = 1.0;
    return m;
  };
  hooks.on_epoch = [&](const EpochRecord&, const Checkpoint& c) { snapshots.push_back(c.params); };
  const auto result = train(cfg, splits_->train, splits_->val, splits_->table, hooks);
  EXPECT_EQ(result.best_epoch, 2u);
  ASSERT_EQ(snapshots.size(), 3u);
  for (std::size_t p = 0; p < snapshots[1].size(); ++p) {
    EXPECT_EQ(result.best.params.at(p).values(), snapshots[1].at(p).values());
    EXPECT_EQ(result.last.params.at(p).values(), snapshots[2].at(p).values());
  }
  // Flat validation loss with patience 2: the decay lands after epoch 3.
  EXPECT_DOUBLE_EQ(result.history[2].lr, cfg.lr);
  EXPECT_DOUBLE_EQ(result.last.scheduler.current_lr, cfg.lr * 0.1);
}

TEST_F(ToyTraining, EmptyDatasetsRejected) {
  const auto cfg = config(1);
  EXPECT_THROW(train(cfg, Dataset{}, splits_->val, splits_->table), DataError);
  EXPECT_THROW(train(cfg, splits_->train, Dataset{}, splits_->table), DataError);
}
