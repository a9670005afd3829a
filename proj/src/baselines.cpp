#include "dlstf/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>

#include "dlstf/format.hpp"

namespace dlstf {

Matrix persistence_forecast(const TimeSeriesPanel& history, std::size_t h) {
  if (history.steps() == 0) throw DataError("persistence: empty history");
  Matrix out(h, history.stations());
  for (std::size_t s = 0; s < history.stations(); ++s) {
    std::size_t r = history.steps();
    while (r > 0 && is_missing(history.at(r - 1, s))) --r;
    if (r == 0) {
      throw DataError("persistence: station '" + history.station_ids()[s] +
                      "' has no observation in the history");
    }
    const double last = history.at(r - 1, s);
    for (std::size_t k = 0; k < h; ++k) out(k, s) = last;
  }
  return out;
}

ArModel ar_fit(std::span<const double> series, std::size_t p, RowRange train,
               std::string station_id) {
  if (p < 1) throw std::invalid_argument("ar_fit: order p must be >= 1");
  if (train.end > series.size() || train.begin >= train.end) {
    throw DataError("ar_fit: training range outside the series");
  }
  if (train.size() <= p + 1) {
    throw DataError("ar_fit: training range of " + std::to_string(train.size()) +
                    " rows is too short for order " + std::to_string(p));
  }
  // Regression rows touching a missing value are left out.
  std::vector<std::size_t> targets;
  for (std::size_t t = train.begin + p; t < train.end; ++t) {
    bool complete = !is_missing(series[t]);
    for (std::size_t lag = 1; lag <= p && complete; ++lag) complete = !is_missing(series[t - lag]);
    if (complete) targets.push_back(t);
  }
  if (targets.size() <= p + 1) {
    throw DataError("ar_fit: only " + std::to_string(targets.size()) +
                    " complete regression rows for station '" + station_id + "'");
  }

  const auto cols = static_cast<Eigen::Index>(p + 1);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(targets.size()), cols);
  Eigen::VectorXd target(static_cast<Eigen::Index>(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const std::size_t t = targets[k];
    const auto row = static_cast<Eigen::Index>(k);
    design(row, 0) = 1.0;
    for (std::size_t lag = 1; lag <= p; ++lag) {
      design(row, static_cast<Eigen::Index>(lag)) = series[t - lag];
    }
    target(row) = series[t];
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) {
    throw DataError("ar_fit: singular design matrix for station '" + station_id + "' (rank " +
                    std::to_string(qr.rank()) + " of " + std::to_string(cols) + ")");
  }
  const Eigen::VectorXd beta = qr.solve(target);

  ArModel model{std::move(station_id), p, beta(0), {}};
  for (std::size_t lag = 1; lag <= p; ++lag) {
    model.coefficients.push_back(beta(static_cast<Eigen::Index>(lag)));
  }
  return model;
}

std::vector<double> ar_forecast(const ArModel& model, std::span<const double> history,
                                std::size_t h) {
  const std::size_t p = model.order;
  if (p < 1 || model.coefficients.size() != p) throw std::invalid_argument("malformed AR model");
  if (history.size() < p) {
    throw DataError("ar_forecast: need " + std::to_string(p) + " history values, got " +
                    std::to_string(history.size()));
  }
  std::vector<double> lags(history.end() - static_cast<std::ptrdiff_t>(p), history.end());
  std::vector<double> out;
  out.reserve(h);
  for (std::size_t k = 0; k < h; ++k) {
    double y = model.intercept;
    for (std::size_t lag = 1; lag <= p; ++lag) y += model.coefficients[lag - 1] * lags[p - lag];
    out.push_back(y);
    lags.erase(lags.begin());
    lags.push_back(y);
  }
  return out;
}

Metrics compute_metrics(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(actual.size()) + " actuals");
  }
  if (pred.empty()) throw std::invalid_argument("compute_metrics: no values");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double e = pred[k] - actual[k];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double m = static_cast<double>(pred.size());
  Metrics out{abs_sum / m, std::sqrt(sq_sum / m), std::nullopt};
  const auto [lo, hi] = std::minmax_element(actual.begin(), actual.end());
  const double range = *hi - *lo;
  if (range > 0.0) out.nrmse = 100.0 * out.rmse / range;
  return out;
}

void write_report_csv(const ErrorReport& report, std::ostream& out) {
  auto row = [&](const std::string& name, const Metrics& m) {
    out << name << ',' << format_double(m.mae) << ',' << format_double(m.rmse) << ','
        << (m.nrmse ? format_double(*m.nrmse) : std::string("NA")) << '\n';
  };
  out << "station,mae,rmse,nrmse\n";
  for (std::size_t s = 0; s < report.stations.size(); ++s) {
    row(report.stations[s], report.per_station[s]);
  }
  row("MEAN", report.mean);
}

EvalResult evaluate(const Forecaster& forecaster, const TimeSeriesPanel& panel,
                    const EvalConfig& cfg) {
  if (cfg.h < 1) throw std::invalid_argument("evaluate: h must be >= 1");
  const std::size_t end = cfg.end_row == 0 ? panel.steps() : std::min(cfg.end_row, panel.steps());
  const std::size_t n = panel.stations();

  std::vector<std::size_t> starts;
  for (std::size_t b = std::max(cfg.begin_row, cfg.history); b + cfg.h <= end; b += cfg.h) {
    bool ok = true;
    for (std::size_t r = b - cfg.history; r < b && ok; ++r) ok = panel.row_complete(r);
    if (ok) starts.push_back(b);
  }
  if (starts.empty()) {
    throw DataError("evaluate: no complete forecast blocks in rows [" +
                    std::to_string(cfg.begin_row) + ", " + std::to_string(end) + ")");
  }

  std::vector<Matrix> blocks(starts.size());
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(starts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    try {
      const std::size_t b = starts[static_cast<std::size_t>(k)];
      Matrix pred = forecaster(panel.slice(b - cfg.history, b), cfg.h);
      if (pred.rows() != cfg.h || pred.cols() != n) {
        throw ShapeError("forecaster returned " + pred.shape_string() + ", expected " +
                         std::to_string(cfg.h) + "x" + std::to_string(n));
      }
      blocks[static_cast<std::size_t>(k)] = std::move(pred);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  EvalResult result;
  result.blocks = starts.size();
  std::vector<std::vector<double>> preds(n), actuals(n);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    for (std::size_t step = 0; step < cfg.h; ++step) {
      const std::size_t r = starts[k] + step;
      const auto row = blocks[k].row(step);
      result.trace.rows.push_back(r);
      result.trace.offsets.push_back(step + 1);
      result.trace.forecasts.emplace_back(std::vector<double>(row.begin(), row.end()));
      for (std::size_t s = 0; s < n; ++s) {
        const double a = panel.at(r, s);
        if (is_missing(a)) continue;
        preds[s].push_back(row[s]);
        actuals[s].push_back(a);
      }
    }
  }

  auto& report = result.report;
  report.stations = panel.station_ids();
  report.station_count = n;
  double nrmse_sum = 0.0;
  std::size_t nrmse_count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (preds[s].empty()) {
      throw DataError("evaluate: station '" + panel.station_ids()[s] + "' has no scored values");
    }
    const Metrics m = compute_metrics(preds[s], actuals[s]);
    report.per_station.push_back(m);
    report.sample_count += preds[s].size();
    report.mean.mae += m.mae;
    report.mean.rmse += m.rmse;
    if (m.nrmse) {
      nrmse_sum += *m.nrmse;
      ++nrmse_count;
    }
  }
  report.mean.mae /= static_cast<double>(n);
  report.mean.rmse /= static_cast<double>(n);
  if (nrmse_count > 0) report.mean.nrmse = nrmse_sum / static_cast<double>(nrmse_count);
  return result;
}

Forecaster persistence_forecaster() {
  return [](const TimeSeriesPanel& history, std::size_t h) {
    return persistence_forecast(history, h);
  };
}

Forecaster ar_forecaster(std::vector<ArModel> models) {
  return [models = std::move(models)](const TimeSeriesPanel& history, std::size_t h) {
    if (models.size() != history.stations()) {
      throw ShapeError("AR forecaster has " + std::to_string(models.size()) +
                       " models for " + std::to_string(history.stations()) + " stations");
    }
    Matrix out(h, history.stations());
    for (std::size_t s = 0; s < models.size(); ++s) {
      const auto col = history.column(s);
      const auto f = ar_forecast(models[s], col, h);
      for (std::size_t k = 0; k < h; ++k) out(k, s) = f[k];
    }
    return out;
  };
}

}  // namespace dlstf
