#pragma once

// Data-parallel kernels. Each OpenMP kernel has a serial twin that is kept as
// the reference; both reduce in sample order, so their results are
// bit-identical for any thread count.

#include <span>
#include <vector>

#include "dlstf/lstm.hpp"

namespace dlstf::kernels {

struct BatchGradient {
  double mean_loss = 0.0;
  std::vector<double> grad;  // flattened like LstmNetwork::flatten()
};

/// Mean MAE and mean MAE gradient over the samples selected by `indices`.
BatchGradient batch_gradient_serial(const LstmNetwork& net, std::span<const Sample> samples,
                                    std::span<const std::size_t> indices);
BatchGradient batch_gradient_omp(const LstmNetwork& net, std::span<const Sample> samples,
                                 std::span<const std::size_t> indices);

std::vector<Vector> predict_many_serial(const LstmNetwork& net,
                                        std::span<const std::vector<Vector>> sequences);
std::vector<Vector> predict_many_omp(const LstmNetwork& net,
                                     std::span<const std::vector<Vector>> sequences);

/// Sum of per-sample MAE, accumulated in sample order.
double total_mae_serial(const LstmNetwork& net, std::span<const Sample> samples);
double total_mae_omp(const LstmNetwork& net, std::span<const Sample> samples);

int max_threads();

}  // namespace dlstf::kernels
