#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "relnov/data/synthetic.hpp"
#include "relnov/model/checkpoint.hpp"
#include "relnov/numerics/gradcheck.hpp"
#include "relnov/training/losses.hpp"
#include "relnov/training/optimizer.hpp"
#include "relnov/training/trainer.hpp"

using namespace relnov;

namespace {

struct OneParam {
  Tensor<double> w;
  std::vector<ParamRef<double>> refs() { return {{"w", &w}}; }
  void set_grad(std::initializer_list<double> g) {
    std::size_t i = 0;
    for (double v : g) w.grad()[i++] = v;
  }
};

TrainConfig plain(OptimizerKind kind) {
  TrainConfig cfg;
  cfg.optimizer = kind;
  cfg.momentum = 0;
  cfg.weight_decay = 0;
  cfg.trust_coefficient = 1;
  return cfg;
}

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.input_dim = 16;
  cfg.feature_dim = 16;
  cfg.model_dim = 16;
  cfg.num_blocks = 1;
  cfg.num_heads = 2;
  cfg.mlp_ratio = 2;
  return cfg;
}

TrainConfig short_training(std::size_t iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch_size = 64;
  cfg.warmup_iters = 10;
  cfg.log_every = 10;
  return cfg;
}

SyntheticSpec small_data() {
  SyntheticSpec spec;
  spec.samples_per_class = 40;
  return spec;
}

}  // namespace

TEST(Losses, MseExamples) {
  const std::vector<double> perfect_s{1, 0}, perfect_l{1, 0};
  EXPECT_EQ(mse_pair_loss(perfect_s, perfect_l), 0.0);
  const std::vector<double> half{0.5}, one{1};
  EXPECT_DOUBLE_EQ(mse_pair_loss(half, one), 0.25);
}

TEST(Losses, MseComplementSymmetry) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(7), l(7), s2(7), l2(7);
    for (std::size_t i = 0; i < 7; ++i) {
      s[i] = u(rng);
      l[i] = static_cast<double>(rng() % 2);
      s2[i] = 1 - s[i];
      l2[i] = 1 - l[i];
    }
    EXPECT_NEAR(mse_pair_loss(s, l), mse_pair_loss(s2, l2), 1e-15);
  }
}

TEST(Losses, BinaryCeHalfIsLnTwo) {
  const std::vector<double> half{0.5}, one{1};
  EXPECT_NEAR(binary_ce_pair_loss(half, one), std::log(2.0), 1e-15);
}

TEST(Losses, LengthMismatch) {
  const std::vector<double> a{0.5, 0.5}, b{1};
  EXPECT_THROW(mse_pair_loss(a, b), DimensionError);
  EXPECT_THROW(binary_ce_pair_loss(a, b), DimensionError);
  Tape<double> tape;
  EXPECT_THROW(mse_pair_loss(tape.constant(Tensor<double>({2})), Tensor<double>({3})), DimensionError);
}

TEST(Losses, LossTrendFacts) {
  const auto ce = [](double p) { return -std::log(p); };
  const auto scaled_mse = [](double p) { return std::pow((p - 1.0) / 0.5, 2); };
  EXPECT_GT(ce(0.01), scaled_mse(0.01));
  EXPECT_NEAR(ce(0.01), 4.605, 1e-3);
  EXPECT_NEAR(scaled_mse(0.01), 3.92, 1e-2);
  EXPECT_LT(ce(0.5), scaled_mse(0.5));
  EXPECT_DOUBLE_EQ(scaled_mse(0.5), 1.0);
}

TEST(Losses, NonNegativeAndZeroOnlyWhenPerfect) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1e-6, 1 - 1e-6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(5), l(5);
    for (std::size_t i = 0; i < 5; ++i) {
      s[i] = u(rng);
      l[i] = static_cast<double>(rng() % 2);
    }
    EXPECT_GT(mse_pair_loss(s, l), 0.0);
    EXPECT_GT(binary_ce_pair_loss(s, l), 0.0);
  }
  const std::vector<double> near{1 - 1e-12, 1e-12}, labels{1, 0};
  EXPECT_LT(binary_ce_pair_loss(near, labels), 1e-11);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<double> logits({6});
    Tensor<double> labels({6});
    for (std::size_t i = 0; i < 6; ++i) {
      logits[i] = normal(rng);
      labels[i] = static_cast<double>(rng() % 2);
    }
    const auto mse = finite_diff_check(
        [&](Tape<double>& tape) { return mse_pair_loss(sigmoid(tape.leaf(logits)), labels); },
        {{"logits", &logits}}, 1e-6);
    EXPECT_TRUE(mse.passed) << mse.max_rel_error;
    const auto ce = finite_diff_check(
        [&](Tape<double>& tape) { return binary_ce_pair_loss(tape.leaf(logits), labels); },
        {{"logits", &logits}}, 1e-6);
    EXPECT_TRUE(ce.passed) << ce.max_rel_error;
  }
}

TEST(Lars, HandExample) {
  OneParam p{Tensor<double>::vector({3, 4})};
  p.set_grad({0, 1});
  OptimizerState<double> state;
  lars_step(p.refs(), state, plain(OptimizerKind::lars), 0.1);
  EXPECT_NEAR(p.w[0], 3.0, 1e-12);
  EXPECT_NEAR(p.w[1], 3.5, 1e-9);
  EXPECT_EQ(state.step, 1u);
}

TEST(Lars, ZeroGradientLeavesWeights) {
  OneParam p{Tensor<double>::vector({3, 4})};
  p.set_grad({0, 0});
  OptimizerState<double> state;
  lars_step(p.refs(), state, plain(OptimizerKind::lars), 0.1);
  EXPECT_EQ(p.w, Tensor<double>::vector({3, 4}));
}

TEST(Lars, ZeroWeightsUseUnitLocalRate) {
  OneParam p{Tensor<double>::vector({0, 0})};
  p.set_grad({1, 2});
  OptimizerState<double> state;
  lars_step(p.refs(), state, plain(OptimizerKind::lars), 0.1);
  EXPECT_NEAR(p.w[0], -0.1, 1e-15);
  EXPECT_NEAR(p.w[1], -0.2, 1e-15);
}

// With momentum 0 the step length is trust * lr * ||w||, so a second step
// scales with the updated norm ||w1||. Two steps at lr match one step at 2 lr
// only if ||w1|| = ||w0||; under a constant gradient they follow
// w2 = w0 - trust * lr * (||w0|| + ||w1||) * g / ||g||.
TEST(Lars, TwoStepsVersusDoubledLr) {
  TrainConfig cfg = plain(OptimizerKind::lars);
  cfg.trust_coefficient = 0.5;
  const double lr = 0.1;
  OneParam two{Tensor<double>::vector({3, 4})};
  OptimizerState<double> s1;
  const double n0 = norm(two.w.data());
  two.set_grad({1, 2});
  lars_step(two.refs(), s1, cfg, lr);
  const double n1 = norm(two.w.data());
  two.w.zero_grad();
  two.set_grad({1, 2});
  lars_step(two.refs(), s1, cfg, lr);

  const double gnorm = std::sqrt(5.0);
  const double expected0 = 3 - 0.5 * lr * (n0 + n1) * 1 / gnorm;
  const double expected1 = 4 - 0.5 * lr * (n0 + n1) * 2 / gnorm;
  EXPECT_NEAR(two.w[0], expected0, 1e-12);
  EXPECT_NEAR(two.w[1], expected1, 1e-12);

  OneParam one{Tensor<double>::vector({3, 4})};
  OptimizerState<double> s2;
  one.set_grad({1, 2});
  lars_step(one.refs(), s2, cfg, 2 * lr);
  EXPECT_GT(std::abs(one.w[0] - two.w[0]), 1e-6);
}

TEST(Lars, GradientScaleInvariance) {
  TrainConfig cfg = plain(OptimizerKind::lars);
  cfg.trust_coefficient = 0.01;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w0(5), g(5);
    for (std::size_t i = 0; i < 5; ++i) {
      w0[i] = normal(rng);
      g[i] = normal(rng);
    }
    std::vector<std::vector<double>> deltas;
    for (double factor : {1.0, 1e-3, 250.0}) {
      OneParam p{Tensor<double>({5}, w0)};
      for (std::size_t i = 0; i < 5; ++i) p.w.grad()[i] = factor * g[i];
      OptimizerState<double> state;
      lars_step(p.refs(), state, cfg, 0.3);
      std::vector<double> delta(5);
      for (std::size_t i = 0; i < 5; ++i) delta[i] = p.w[i] - w0[i];
      EXPECT_NEAR(norm(delta), 0.01 * 0.3 * norm(w0), 1e-9 * norm(w0));
      deltas.push_back(delta);
    }
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(deltas[1][i], deltas[0][i], 1e-8);
      EXPECT_NEAR(deltas[2][i], deltas[0][i], 1e-8);
    }
  }
}

TEST(Lars, NonFiniteGradientNamesParameter) {
  OneParam p{Tensor<double>::vector({1, 1})};
  p.set_grad({NAN, 0});
  OptimizerState<double> state;
  try {
    lars_step(p.refs(), state, plain(OptimizerKind::lars), 0.1);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("w"), std::string::npos);
  }
}

TEST(Sgd, SingleStep) {
  OneParam p{Tensor<double>::vector({1})};
  p.set_grad({1});
  OptimizerState<double> state;
  sgd_step(p.refs(), state, plain(OptimizerKind::sgd), 0.1);
  EXPECT_NEAR(p.w[0], 0.9, 1e-15);
}

TEST(Sgd, MomentumTwoSteps) {
  OneParam p{Tensor<double>::vector({0})};
  TrainConfig cfg = plain(OptimizerKind::sgd);
  cfg.momentum = 0.9;
  OptimizerState<double> state;
  for (int i = 0; i < 2; ++i) {
    p.w.zero_grad();
    p.set_grad({1});
    sgd_step(p.refs(), state, cfg, 0.1);
  }
  EXPECT_NEAR(p.w[0], -0.29, 1e-15);
}

TEST(Sgd, WeightDecayOnly) {
  OneParam p{Tensor<double>::vector({1})};
  TrainConfig cfg = plain(OptimizerKind::sgd);
  cfg.weight_decay = 0.1;
  p.set_grad({0});
  OptimizerState<double> state;
  sgd_step(p.refs(), state, cfg, 0.1);
  EXPECT_NEAR(p.w[0], 0.99, 1e-15);
}

TEST(Sgd, ConstantGradientTwoStepsEqualDoubledLr) {
  OneParam a{Tensor<double>::vector({2, -1})}, b{Tensor<double>::vector({2, -1})};
  OptimizerState<double> sa, sb;
  for (int i = 0; i < 2; ++i) {
    a.w.zero_grad();
    a.set_grad({0.5, 3});
    sgd_step(a.refs(), sa, plain(OptimizerKind::sgd), 0.1);
  }
  b.set_grad({0.5, 3});
  sgd_step(b.refs(), sb, plain(OptimizerKind::sgd), 0.2);
  EXPECT_NEAR(a.w[0], b.w[0], 1e-15);
  EXPECT_NEAR(a.w[1], b.w[1], 1e-15);
}

TEST(LrSchedule, Warmup) {
  TrainConfig cfg;
  cfg.base_lr = 0.008;
  cfg.warmup_iters = 500;
  EXPECT_NEAR(lr_at(249, cfg), 0.004, 1e-15);
  EXPECT_DOUBLE_EQ(lr_at(500, cfg), 0.008);
  EXPECT_DOUBLE_EQ(lr_at(12000, cfg), 0.008);
  cfg.warmup_iters = 1;
  EXPECT_DOUBLE_EQ(lr_at(0, cfg), 0.008);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.base_lr = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.weight_decay = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Train, DeterministicLossTraceAndCheckpoint) {
  const auto data = generate_synthetic(small_data());
  std::string bytes[2];
  std::vector<double> losses[2];
  for (int run = 0; run < 2; ++run) {
    RelationalModel<float> model(small_model());
    losses[run] = train(model, data.support, short_training(30)).losses;
    std::ostringstream out;
    save_checkpoint(model, out);
    bytes[run] = out.str();
  }
  EXPECT_EQ(losses[0], losses[1]);
  EXPECT_EQ(bytes[0], bytes[1]);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto data = generate_synthetic(small_data());
  RelationalModel<float> model(small_model());
  std::ostringstream before;
  save_checkpoint(model, before);
  TrainConfig cfg = short_training(5);
  cfg.base_lr = 0;
  train(model, data.support, cfg);
  std::ostringstream after;
  save_checkpoint(model, after);
  EXPECT_EQ(before.str(), after.str());
}

TEST(Train, LogCadence) {
  const auto data = generate_synthetic(small_data());
  RelationalModel<float> model(small_model());
  TrainConfig cfg = short_training(25);
  std::vector<std::size_t> seen;
  const auto result = train(model, data.support, cfg, [&](const LossRecord& r) { seen.push_back(r.iter); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 10, 20, 24}));
  EXPECT_EQ(result.losses.size(), 25u);
  std::ostringstream csv;
  write_loss_csv(result, csv);
  EXPECT_TRUE(csv.str().starts_with("iter,loss,lr\n"));
}

TEST(Train, SingleClassSupportIsDataError) {
  auto data = generate_synthetic(small_data());
  auto one_class = data.support.subset({0, 1, 2});
  RelationalModel<float> model(small_model());
  EXPECT_THROW(train(model, one_class, short_training(2)), DataError);
}

TEST(Train, NonFiniteLossAbortsWithIteration) {
  const auto data = generate_synthetic(small_data());
  RelationalModel<float> model(small_model());
  model.head.bias[0] = NAN;
  try {
    train(model, data.support, short_training(3));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 0"), std::string::npos) << e.what();
  }
}

TEST(Train, ReducesLossOnSeparableData) {
  const auto data = generate_synthetic(small_data());
  for (LossKind loss : {LossKind::mse, LossKind::binary_ce}) {
    ModelConfig mc = small_model();
    mc.head_mode = loss == LossKind::binary_ce ? HeadMode::classification_2way : HeadMode::regression_sigmoid;
    RelationalModel<float> model(mc);
    TrainConfig cfg = short_training(400);
    cfg.loss = loss;
    cfg.base_lr = 0.005;
    const auto result = train(model, data.support, cfg);
    double head = 0, tail = 0;
    for (std::size_t i = 0; i < 10; ++i) head += result.losses[i] / 10;
    for (std::size_t i = 350; i < 400; ++i) tail += result.losses[i] / 50;
    EXPECT_LT(tail, 0.25 * head) << to_string(loss);
  }
}
