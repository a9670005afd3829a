#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dlstf/baselines.hpp"
#include "dlstf/dataset.hpp"

namespace dlstf {

struct SynthConfig {
  std::size_t n = 6;
  std::size_t steps = 5000;
  std::uint64_t seed = 0;
  double coupling = 0.8;
  double noise = 0.3;
};

/// Index of the station that station j draws from (its upwind neighbour).
inline std::size_t synth_upwind(std::size_t j, std::size_t n) { return (j + 1) % n; }

/// Wind-speed-like panel of `n` coupled stations, ids S01.., hourly from
/// 2014-01-01T00:00:00Z.
///
/// Latent state of station j at hour t:
///   z_j(t) = c * D(t - lag_j) + 0.5 * c * a_up(j)(t - 1) + sqrt(1 - c^2) * a_j(t)
/// where D is a shared unit-variance driver made of a 24 h and a 67 h
/// sinusoid with seeded phases, lag_j is drawn from {1, 2, 3}, a_j is a
/// unit-variance AR(1) process with coefficient 0.7 private to station j,
/// and c is the coupling. Observations are 6 + 2.5 * z_j(t) + noise * N(0, 1),
/// shifted up if any value would be negative. With c = 0 the stations are
/// independent.
TimeSeriesPanel synth_generate(const SynthConfig& cfg);

/// Sample Pearson correlation between a[t] and b[t - lag] over overlapping t.
double lagged_correlation(std::span<const double> a, std::span<const double> b, std::size_t lag);

/// Writes `<station>.csv` (time_index,actual,forecast) per requested station
/// and an `index.csv` listing them. time_index is the panel row. Returns the
/// written paths, index last.
std::vector<std::filesystem::path> emit_plot_data(const EvalTrace& trace,
                                                  const TimeSeriesPanel& actuals,
                                                  std::span<const std::string> stations,
                                                  const std::filesystem::path& out_dir);

}  // namespace dlstf
