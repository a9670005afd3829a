#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dlstf/lstm.hpp"

namespace dlstf {

/// Raised when training produces a non-finite loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double rho = 0.9;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct RmspropState {
  std::vector<double> mean_square;
};

struct LossResult {
  double loss = 0.0;
  Vector grad;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;

  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  LstmNetwork net;
  TrainHistory history;
};

/// Test seam: replaces the validation MAE computed after each epoch.
struct TrainHooks {
  std::function<double(const LstmNetwork&, std::size_t epoch)> validation_override;
};

/// Mean absolute error; the subgradient at a zero residual is 0.
LossResult mae_loss(const Vector& pred, const Vector& target);

/// Scales `grads` in place so its L2 norm is at most max_norm. Returns the original norm.
double clip_global_norm(std::span<double> grads, double max_norm);

/// One RMSprop step on flat parameters, after clipping a copy of `grads`
/// to cfg.clip_norm:
///   s     <- rho * s + (1 - rho) * g^2
///   theta <- theta - lr * g / (sqrt(s) + eps)
void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    RmspropState& state, const TrainConfig& cfg);

/// Average MAE of the network over `samples` (0 for an empty set).
double mean_mae(const LstmNetwork& net, std::span<const Sample> samples);

/// Mini-batch RMSprop on MAE with per-epoch seeded shuffling and early
/// stopping on validation MAE. Returns the parameters of the best epoch.
/// With no validation samples the epoch's training loss is monitored instead.
TrainResult train_model(LstmNetwork net, std::span<const Sample> train_samples,
                        std::span<const Sample> val_samples, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});

}  // namespace dlstf
