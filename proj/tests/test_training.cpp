#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dlstf/parallel.hpp"
#include "dlstf/rng.hpp"
#include "dlstf/training.hpp"

using namespace dlstf;

namespace {

// Target is half the mean of all inputs in the window.
std::vector<Sample> toy_linear_task(std::uint64_t seed, std::size_t count, std::size_t steps,
                                    std::size_t n) {
  Rng rng(seed);
  std::vector<Sample> out;
  for (std::size_t s = 0; s < count; ++s) {
    Sample sample;
    double sum = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      Vector x(n);
      for (double& v : x) {
        v = rng.uniform01();
        sum += v;
      }
      sample.sequence.push_back(std::move(x));
    }
    sample.target = Vector(n, 0.5 * sum / static_cast<double>(steps * n));
    out.push_back(std::move(sample));
  }
  return out;
}

TrainConfig quick_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 15;
  cfg.patience = 5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(MaeLoss, PerfectPredictionHasZeroLossAndGradient) {
  const auto r = mae_loss(Vector{1, 2, 3}, Vector{1, 2, 3});
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.grad, (Vector{0, 0, 0}));
}

TEST(MaeLoss, HandCases) {
  const auto a = mae_loss(Vector{0, 0}, Vector{1, -1});
  EXPECT_EQ(a.loss, (1.0 + 1.0) / 2.0);
  EXPECT_EQ(a.grad, (Vector{-1.0 / 2, 1.0 / 2}));

  const auto b = mae_loss(Vector{3}, Vector{5});
  EXPECT_EQ(b.loss, 2.0);
  EXPECT_EQ(b.grad, (Vector{-1.0}));
}

TEST(MaeLoss, SubgradientAtZeroResidualIsZero) {
  const auto r = mae_loss(Vector{1, 4}, Vector{1, 2});
  EXPECT_EQ(r.grad[0], 0.0);
  EXPECT_EQ(r.grad[1], 0.5);
}

TEST(MaeLoss, RejectsBadLengths) {
  EXPECT_THROW(mae_loss(Vector{1, 2}, Vector{1}), ShapeError);
  EXPECT_THROW(mae_loss(Vector{}, Vector{}), std::invalid_argument);
}

TEST(ClipGlobalNorm, ScalesOnlyWhenAboveLimit) {
  std::vector<double> g{3, 4};
  EXPECT_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_EQ(g, (std::vector<double>{3, 4}));
  EXPECT_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  EXPECT_NEAR(g[1], 0.8, 1e-15);
}

TEST(Rmsprop, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> theta{0.5, -1.5};
  RmspropState st;
  rmsprop_update(theta, std::vector<double>{0, 0}, st, TrainConfig{});
  EXPECT_EQ(theta, (std::vector<double>{0.5, -1.5}));
  EXPECT_EQ(st.mean_square, (std::vector<double>{0, 0}));
}

TEST(Rmsprop, ScalarHandStep) {
  std::vector<double> theta{0.0};
  RmspropState st;
  rmsprop_update(theta, std::vector<double>{2.0}, st, TrainConfig{});
  const double s = 0.9 * 0.0 + 0.1 * 2.0 * 2.0;
  EXPECT_NEAR(st.mean_square[0], s, 1e-15);
  EXPECT_NEAR(st.mean_square[0], 0.4, 1e-15);
  EXPECT_NEAR(theta[0], -0.001 * 2.0 / std::sqrt(0.4), 1e-9);
  EXPECT_NEAR(theta[0], -0.0031623, 1e-7);
}

TEST(Rmsprop, ConstantGradientSignMovesMonotonically) {
  std::vector<double> theta{1.0, 1.0};
  RmspropState st;
  std::vector<double> prev = theta;
  for (int step = 0; step < 10; ++step) {
    rmsprop_update(theta, std::vector<double>{0.7, -0.2}, st, TrainConfig{});
    EXPECT_LT(theta[0], prev[0]);
    EXPECT_GT(theta[1], prev[1]);
    prev = theta;
  }
}

TEST(Rmsprop, FirstStepIsScaleFree) {
  const TrainConfig cfg;
  const double expected = cfg.learning_rate / std::sqrt(1.0 - cfg.rho);
  for (double mag : {0.01, 1.0, 100.0}) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> theta{0.0};
      RmspropState st;
      rmsprop_update(theta, std::vector<double>{sign * mag}, st, cfg);
      EXPECT_NEAR(theta[0], -sign * expected, 1e-6) << "|g|=" << mag;
    }
  }
}

TEST(Rmsprop, AccumulatorsStayNonNegative) {
  Rng rng(5);
  std::vector<double> theta(20, 0.0);
  RmspropState st;
  for (int step = 0; step < 50; ++step) {
    std::vector<double> g(20);
    for (double& v : g) v = rng.uniform(-3, 3);
    rmsprop_update(theta, g, st, TrainConfig{});
    for (double s : st.mean_square) ASSERT_GE(s, 0.0);
  }
}

TEST(Rmsprop, ClipsBeforeAccumulating) {
  TrainConfig cfg;
  cfg.clip_norm = 1.0;
  std::vector<double> theta{0, 0};
  RmspropState st;
  rmsprop_update(theta, std::vector<double>{30, 40}, st, cfg);
  EXPECT_NEAR(st.mean_square[0], 0.1 * 0.6 * 0.6, 1e-15);
  EXPECT_NEAR(st.mean_square[1], 0.1 * 0.8 * 0.8, 1e-15);
}

TEST(Rmsprop, ShapeMismatchThrows) {
  std::vector<double> theta{0, 0};
  RmspropState st;
  EXPECT_THROW(rmsprop_update(theta, std::vector<double>{1}, st, TrainConfig{}), ShapeError);
  st.mean_square = {0, 0, 0};
  EXPECT_THROW(rmsprop_update(theta, std::vector<double>{1, 1}, st, TrainConfig{}), ShapeError);
}

TEST(TrainConfig, RejectsOutOfRangeFields) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.learning_rate = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](TrainConfig& c) { c.rho = 1.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](TrainConfig& c) { c.rho = 0.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](TrainConfig& c) { c.batch_size = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](TrainConfig& c) { c.patience = 0; }).validate(), std::invalid_argument);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(BatchGradient, EqualsMeanOfPerSampleGradients) {
  const auto samples = toy_linear_task(3, 7, 4, 2);
  const std::vector<std::size_t> widths{5};
  const LstmNetwork net = init_params(widths, 2, 1);
  const std::vector<std::size_t> idx{4, 0, 6, 2, 1};

  std::vector<double> sum(net.parameter_count(), 0.0);
  double loss_sum = 0.0;
  for (auto k : idx) {
    const auto fwd = net_forward(net, samples[k].sequence);
    const auto mae = mae_loss(fwd.prediction, samples[k].target);
    const auto g = net_backward(net, fwd.cache, mae.grad).flatten();
    loss_sum += mae.loss;
    for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += g[p];
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (double& v : sum) v *= inv;

  const auto bg = kernels::batch_gradient_serial(net, samples, idx);
  EXPECT_EQ(bg.grad, sum);
  EXPECT_EQ(bg.mean_loss, loss_sum * inv);
}

TEST(TrainModel, DeterministicForSameSeed) {
  const auto train = toy_linear_task(1, 120, 5, 2);
  const auto val = toy_linear_task(2, 40, 5, 2);
  const std::vector<std::size_t> widths{6};
  const LstmNetwork net = init_params(widths, 2, 4);
  const auto a = train_model(net, train, val, quick_config(9));
  const auto b = train_model(net, train, val, quick_config(9));
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.net, b.net);
  const auto c = train_model(net, train, val, quick_config(10));
  EXPECT_NE(a.net, c.net);
}

TEST(TrainModel, ReducesLossOnToyLinearTask) {
  const auto train = toy_linear_task(21, 200, 6, 3);
  const std::vector<std::size_t> widths{8};
  const LstmNetwork net = init_params(widths, 3, 2);
  const double before = mean_mae(net, train);
  TrainConfig cfg = quick_config(3);
  cfg.max_epochs = 20;
  const auto result = train_model(net, train, {}, cfg);
  EXPECT_LT(mean_mae(result.net, train), before);
  EXPECT_LT(result.history.train_loss.back(), result.history.train_loss.front());
}

TEST(TrainModel, EarlyStopsOnRisingValidation) {
  const auto train = toy_linear_task(1, 40, 3, 1);
  const std::vector<std::size_t> widths{3};
  TrainConfig cfg = quick_config(1);
  cfg.patience = 2;
  cfg.max_epochs = 50;
  TrainHooks hooks;
  std::vector<double> schedule{0.9, 0.8, 0.7, 0.75, 0.8, 0.85, 0.9};
  hooks.validation_override = [&](const LstmNetwork&, std::size_t epoch) {
    return schedule.at(epoch - 1);
  };
  const auto r = train_model(init_params(widths, 1, 1), train, {}, cfg, hooks);
  EXPECT_EQ(r.history.stopped_epoch, 5u);
  EXPECT_EQ(r.history.best_epoch, 3u);
  EXPECT_EQ(r.history.val_loss.size(), 5u);
  EXPECT_EQ(r.history.train_loss.size(), 5u);
}

TEST(TrainModel, ReturnsParametersOfBestValidationEpoch) {
  const auto train = toy_linear_task(5, 100, 4, 2);
  const auto val = toy_linear_task(6, 30, 4, 2);
  const std::vector<std::size_t> widths{4};
  TrainConfig cfg = quick_config(2);
  cfg.learning_rate = 0.05;  // noisy enough that validation does not fall monotonically
  cfg.max_epochs = 25;
  cfg.patience = 4;
  const auto r = train_model(init_params(widths, 2, 3), train, val, cfg);
  const double best = *std::min_element(r.history.val_loss.begin(), r.history.val_loss.end());
  EXPECT_EQ(r.history.val_loss[r.history.best_epoch - 1], best);
  EXPECT_EQ(mean_mae(r.net, val), best);
}

TEST(TrainModel, EmptyTrainingSetThrows) {
  const std::vector<std::size_t> widths{3};
  EXPECT_THROW(train_model(init_params(widths, 1, 1), {}, {}, TrainConfig{}),
               std::invalid_argument);
}

TEST(TrainModel, NonFiniteLossNamesEpochAndBatch) {
  auto train = toy_linear_task(1, 10, 3, 1);
  train[0].target = Vector{std::nan("")};
  const std::vector<std::size_t> widths{3};
  TrainConfig cfg = quick_config(1);
  cfg.batch_size = 4;
  try {
    train_model(init_params(widths, 1, 1), train, {}, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}
