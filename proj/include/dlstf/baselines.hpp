#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dlstf/dataset.hpp"
#include "dlstf/tensor.hpp"

namespace dlstf {

/// Univariate AR(p) with intercept; coefficients[0] multiplies lag 1.
struct ArModel {
  std::string station_id;
  std::size_t order = 0;
  double intercept = 0.0;
  std::vector<double> coefficients;
};

/// Repeats the last real observation of each station for all h steps.
Matrix persistence_forecast(const TimeSeriesPanel& history, std::size_t h);

/// Ordinary least squares on rows [train.begin, train.end) of `series`.
/// Regression rows whose target or lags are missing are skipped.
ArModel ar_fit(std::span<const double> series, std::size_t p, RowRange train,
               std::string station_id = {});

/// Recursive multi-step forecast: each prediction feeds the next step's lags.
std::vector<double> ar_forecast(const ArModel& model, std::span<const double> history,
                                std::size_t h);

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> nrmse;  // percent; empty when the actuals have zero range
};

Metrics compute_metrics(std::span<const double> pred, std::span<const double> actual);

struct ErrorReport {
  std::vector<std::string> stations;
  std::vector<Metrics> per_station;
  Metrics mean;
  std::size_t station_count = 0;
  std::size_t sample_count = 0;  // scored (station, hour) pairs
};

/// `station,mae,rmse,nrmse` rows plus a final MEAN row; undefined NRMSE is written as NA.
void write_report_csv(const ErrorReport& report, std::ostream& out);

/// Given the `history` rows before a block, returns the h x n forecast in m/s.
/// Must not depend on anything but its arguments.
using Forecaster = std::function<Matrix(const TimeSeriesPanel& history, std::size_t h)>;

struct EvalConfig {
  std::size_t h = 6;
  std::size_t history = 12;  // rows handed to the forecaster
  std::size_t begin_row = 0;  // first block start; raised to `history` if smaller
  std::size_t end_row = 0;    // exclusive; 0 = panel end
};

/// Forecasts aligned with the rows they predict.
struct EvalTrace {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> offsets;  // 1..h within the block
  std::vector<Vector> forecasts;     // m/s
};

struct EvalResult {
  ErrorReport report;
  EvalTrace trace;
  std::size_t blocks = 0;
};

/// Blocks of h rows start at begin_row, begin_row + h, ... while they fit
/// before end_row. A block is skipped when any of its history rows has a
/// missing value; missing actuals inside a block are left out of the metrics.
/// The schedule depends only on the panel and cfg, never on the forecaster.
EvalResult evaluate(const Forecaster& forecaster, const TimeSeriesPanel& panel,
                    const EvalConfig& cfg);

Forecaster persistence_forecaster();
/// One AR model per station, in panel station order.
Forecaster ar_forecaster(std::vector<ArModel> models);

}  // namespace dlstf
