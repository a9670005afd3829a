#include "dlstf/parallel.hpp"

#include <omp.h>

#include "dlstf/training.hpp"

namespace dlstf::kernels {

namespace {

/// Loss of one sample; its gradient lands in `grads`.
double sample_gradient(const LstmNetwork& net, const Sample& sample, NetworkGradients& grads) {
  const auto fwd = net_forward(net, sample.sequence);
  const auto mae = mae_loss(fwd.prediction, sample.target);
  net_backward_into(net, fwd.cache, mae.grad, grads);
  return mae.loss;
}

/// acc += grads, in flatten() order.
void accumulate(std::vector<double>& acc, const NetworkGradients& grads) {
  double* out = acc.data();
  grads.for_each_block([&](std::span<const double> s) {
    for (double v : s) *out++ += v;
  });
}

BatchGradient finish(double loss_sum, std::vector<double> acc, std::size_t count) {
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : acc) v *= inv;
  return {loss_sum * inv, std::move(acc)};
}

void check_indices(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("batch gradient over an empty batch");
  for (auto idx : indices) {
    if (idx >= samples.size()) throw std::out_of_range("batch index out of range");
  }
}

}  // namespace

BatchGradient batch_gradient_serial(const LstmNetwork& net, std::span<const Sample> samples,
                                    std::span<const std::size_t> indices) {
  check_indices(samples, indices);
  std::vector<double> acc(net.parameter_count(), 0.0);
  NetworkGradients grads = zeros_like(net);
  double loss_sum = 0.0;
  for (auto idx : indices) {
    loss_sum += sample_gradient(net, samples[idx], grads);
    accumulate(acc, grads);
  }
  return finish(loss_sum, std::move(acc), indices.size());
}

BatchGradient batch_gradient_omp(const LstmNetwork& net, std::span<const Sample> samples,
                                 std::span<const std::size_t> indices) {
  check_indices(samples, indices);
  const auto count = static_cast<std::ptrdiff_t>(indices.size());
  std::vector<double> acc(net.parameter_count(), 0.0);
  double loss_sum = 0.0;
#pragma omp parallel
  {
    NetworkGradients grads = zeros_like(net);
#pragma omp for ordered schedule(static, 1)
    for (std::ptrdiff_t s = 0; s < count; ++s) {
      const double loss = sample_gradient(net, samples[indices[static_cast<std::size_t>(s)]], grads);
#pragma omp ordered
      {
        loss_sum += loss;
        accumulate(acc, grads);
      }
    }
  }
  return finish(loss_sum, std::move(acc), indices.size());
}

std::vector<Vector> predict_many_serial(const LstmNetwork& net,
                                        std::span<const std::vector<Vector>> sequences) {
  std::vector<Vector> out;
  out.reserve(sequences.size());
  for (const auto& seq : sequences) out.push_back(net_predict(net, seq));
  return out;
}

std::vector<Vector> predict_many_omp(const LstmNetwork& net,
                                     std::span<const std::vector<Vector>> sequences) {
  std::vector<Vector> out(sequences.size());
  const auto count = static_cast<std::ptrdiff_t>(sequences.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    out[static_cast<std::size_t>(s)] = net_predict(net, sequences[static_cast<std::size_t>(s)]);
  }
  return out;
}

double total_mae_serial(const LstmNetwork& net, std::span<const Sample> samples) {
  double total = 0.0;
  for (const auto& s : samples) total += mae_loss(net_predict(net, s.sequence), s.target).loss;
  return total;
}

double total_mae_omp(const LstmNetwork& net, std::span<const Sample> samples) {
  std::vector<double> losses(samples.size());
  const auto count = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto& sample = samples[static_cast<std::size_t>(s)];
    losses[static_cast<std::size_t>(s)] =
        mae_loss(net_predict(net, sample.sequence), sample.target).loss;
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace dlstf::kernels
