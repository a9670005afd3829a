#include "dlstf/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dlstf/parallel.hpp"
#include "dlstf/rng.hpp"

namespace dlstf {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
}

LossResult mae_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) {
    throw ShapeError("mae_loss: prediction length " + std::to_string(pred.size()) +
                     " vs target length " + std::to_string(target.size()));
  }
  if (pred.empty()) throw std::invalid_argument("mae_loss: empty vectors");
  const double m = static_cast<double>(pred.size());
  LossResult out{0.0, Vector(pred.size())};
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double e = pred[j] - target[j];
    out.loss += std::abs(e);
    out.grad[j] = (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) / m;
  }
  out.loss /= m;
  return out;
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    RmspropState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size()) {
    throw ShapeError("rmsprop_update: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.mean_square.empty()) state.mean_square.assign(params.size(), 0.0);
  if (state.mean_square.size() != params.size()) {
    throw ShapeError("rmsprop_update: optimizer state has " +
                     std::to_string(state.mean_square.size()) + " entries for " +
                     std::to_string(params.size()) + " parameters");
  }
  std::vector<double> g(grads.begin(), grads.end());
  clip_global_norm(g, cfg.clip_norm);
  for (std::size_t p = 0; p < params.size(); ++p) {
    double& s = state.mean_square[p];
    s = cfg.rho * s + (1.0 - cfg.rho) * g[p] * g[p];
    params[p] -= cfg.learning_rate * g[p] / (std::sqrt(s) + cfg.epsilon);
  }
}

double mean_mae(const LstmNetwork& net, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  return kernels::total_mae_omp(net, samples) / static_cast<double>(samples.size());
}

TrainResult train_model(LstmNetwork net, std::span<const Sample> train_samples,
                        std::span<const Sample> val_samples, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  cfg.validate();
  net.validate();
  if (train_samples.empty()) throw std::invalid_argument("train_model: empty training set");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  RmspropState opt;
  std::vector<double> theta = net.flatten();
  std::vector<double> best_theta = theta;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  TrainHistory history;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0, batch = 1; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      auto bg = kernels::batch_gradient_omp(net, train_samples, idx);
      if (!std::isfinite(bg.mean_loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch));
      }
      loss_sum += bg.mean_loss * static_cast<double>(len);
      rmsprop_update(theta, bg.grad, opt, cfg);
      net.assign(theta);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());

    double val_loss = 0.0;
    if (hooks.validation_override) {
      val_loss = hooks.validation_override(net, epoch);
    } else if (!val_samples.empty()) {
      val_loss = mean_mae(net, val_samples);
    } else {
      val_loss = train_loss;
    }
    if (!std::isfinite(val_loss)) {
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    }

    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    history.stopped_epoch = epoch;

    if (val_loss < best_val) {
      best_val = val_loss;
      best_theta = theta;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  net.assign(best_theta);
  return {std::move(net), std::move(history)};
}

}  // namespace dlstf
