#include "dlstf/horizon.hpp"

#include <string>

#include "dlstf/parallel.hpp"

namespace dlstf {

void HorizonConfig::validate() const {
  if (h < 1) throw std::invalid_argument("horizon h must be >= 1");
  if (ell < 1) throw std::invalid_argument("input horizon ell must be >= 1");
  if (n < 1) throw std::invalid_argument("station count n must be >= 1");
  if (widths.size() != h) {
    throw std::invalid_argument("expected " + std::to_string(h) + " width specifications, got " +
                                std::to_string(widths.size()));
  }
  for (const auto& w : widths) {
    if (w.empty()) throw std::invalid_argument("a model has no LSTM layers");
    for (auto units : w) {
      if (units == 0) throw std::invalid_argument("layer width must be positive");
    }
  }
  if (train.size() != h) {
    throw std::invalid_argument("expected " + std::to_string(h) + " training configs, got " +
                                std::to_string(train.size()));
  }
  for (const auto& t : train) t.validate();
}

std::vector<std::vector<std::size_t>> default_widths(std::size_t h) {
  std::vector<std::vector<std::size_t>> widths;
  for (std::size_t i = 1; i <= h; ++i) {
    widths.push_back(i == 1 ? std::vector<std::size_t>{32} : std::vector<std::size_t>{64, 64});
  }
  return widths;
}

HorizonConfig make_horizon_config(std::size_t n, std::size_t h, std::size_t ell,
                                  const TrainConfig& base,
                                  std::vector<std::vector<std::size_t>> widths) {
  HorizonConfig cfg;
  cfg.h = h;
  cfg.ell = ell;
  cfg.n = n;
  cfg.widths = widths.empty() ? default_widths(h) : std::move(widths);
  for (std::size_t i = 1; i <= h; ++i) {
    TrainConfig t = base;
    t.seed = base.seed + (i - 1);
    cfg.train.push_back(t);
  }
  return cfg;
}

void ModelBank::validate() const {
  config.validate();
  if (models.size() != config.h) {
    throw std::invalid_argument("bank holds " + std::to_string(models.size()) +
                                " models for h = " + std::to_string(config.h));
  }
  for (const auto& m : models) {
    m.validate();
    if (m.input_dim() != config.n || m.output_dim() != config.n) {
      throw ShapeError("bank model dimensions do not match n = " + std::to_string(config.n));
    }
  }
  if (normalizer.stations() != config.n || normalizer.max.size() != config.n) {
    throw ShapeError("bank normalizer does not cover n = " + std::to_string(config.n) +
                     " stations");
  }
}

std::size_t model_index(std::uint64_t t, std::size_t h) {
  const std::uint64_t t_hat = t % h;
  return t_hat != 0 ? static_cast<std::size_t>(t_hat) : h;
}

const Vector* IndexedSeries::find(std::int64_t step) const noexcept {
  const std::int64_t k = step - first_step;
  if (k < 0 || k >= static_cast<std::int64_t>(rows.size())) return nullptr;
  const Vector& v = rows[static_cast<std::size_t>(k)];
  return v.empty() ? nullptr : &v;
}

std::vector<Vector> assemble_input(const IndexedSeries& real_history,
                                   const IndexedSeries& forecast_buffer, std::uint64_t t,
                                   const HorizonConfig& cfg) {
  if (t < 1) throw std::invalid_argument("assemble_input: t must be >= 1");
  const std::size_t i = model_index(t, cfg.h);
  auto real = [&](std::int64_t step) { return real_history.find(step); };
  auto forecast = [&](std::size_t, std::int64_t step) { return forecast_buffer.find(step); };
  std::vector<Vector> window;
  std::int64_t missing = 0;
  if (!assemble_window(real, forecast, static_cast<std::int64_t>(t), i, cfg.ell, window,
                       missing)) {
    const bool wants_real = missing <= static_cast<std::int64_t>(t) - static_cast<std::int64_t>(i);
    throw DataError("input for step " + std::to_string(t) + " (model " + std::to_string(i) +
                    "): step " + std::to_string(missing) + " is not covered by the " +
                    (wants_real ? "real history" : "forecast buffer"));
  }
  return window;
}

namespace {

/// Fills overlay offset k with M_k's prediction at every row where its input window exists.
void fill_overlay(const LstmNetwork& model, std::size_t k, std::size_t ell,
                  const std::vector<Vector>& real_rows, ForecastOverlay& overlay) {
  const std::size_t T = real_rows.size();
  auto real = [&](std::int64_t step) -> const Vector* {
    if (step < 0 || static_cast<std::size_t>(step) >= T) return nullptr;
    const Vector& v = real_rows[static_cast<std::size_t>(step)];
    return v.empty() ? nullptr : &v;
  };
  auto forecast = [&](std::size_t offset, std::int64_t step) -> const Vector* {
    return step < 0 ? nullptr : overlay.find(offset, static_cast<std::size_t>(step));
  };

  std::vector<std::vector<Vector>> windows;
  std::vector<std::size_t> rows;
  std::vector<Vector> window;
  for (std::size_t t = 0; t < T; ++t) {
    std::int64_t missing = 0;
    if (assemble_window(real, forecast, static_cast<std::int64_t>(t), k, ell, window, missing)) {
      windows.push_back(window);
      rows.push_back(t);
    }
  }
  auto preds = kernels::predict_many_omp(model, windows);
  for (std::size_t s = 0; s < rows.size(); ++s) overlay.set(k, rows[s], std::move(preds[s]));
}

}  // namespace

ModelBank train_bank(const TimeSeriesPanel& train, const TimeSeriesPanel& val,
                     const Normalizer& normalizer, const HorizonConfig& cfg,
                     BankTrainReport* report) {
  cfg.validate();
  if (train.stations() != cfg.n || val.stations() != cfg.n) {
    throw DataError("panels have " + std::to_string(train.stations()) + " stations, config n = " +
                    std::to_string(cfg.n));
  }
  if (normalizer.stations() != cfg.n) throw DataError("normalizer does not match n");
  const TimeSeriesPanel combined = concat(train, val);
  const std::size_t train_rows = train.steps();
  if (train_rows <= cfg.ell + cfg.h) {
    throw DataError("insufficient training data: " + std::to_string(train_rows) +
                    " rows, need more than ell + h = " + std::to_string(cfg.ell + cfg.h));
  }

  std::vector<Vector> real_rows(combined.steps());
  for (std::size_t r = 0; r < combined.steps(); ++r) {
    if (combined.row_complete(r)) real_rows[r] = combined.row_vector(r);
  }

  ModelBank bank;
  bank.config = cfg;
  bank.normalizer = normalizer;
  ForecastOverlay overlay(cfg.h > 1 ? cfg.h - 1 : 0, combined.steps());

  for (std::size_t i = 1; i <= cfg.h; ++i) {
    const SampleSet set = make_samples(combined, overlay, cfg.ell, i);
    std::vector<Sample> train_samples;
    std::vector<Sample> val_samples;
    for (std::size_t s = 0; s < set.samples.size(); ++s) {
      (set.target_rows[s] < train_rows ? train_samples : val_samples).push_back(set.samples[s]);
    }
    if (train_samples.empty()) {
      throw DataError("model " + std::to_string(i) + " has no training samples");
    }

    LstmNetwork net = init_params(cfg.widths[i - 1], cfg.n, cfg.train[i - 1].seed,
                                  cfg.gate_activation, cfg.head_activation);
    TrainResult result;
    try {
      result = train_model(std::move(net), train_samples, val_samples, cfg.train[i - 1]);
    } catch (const NumericalError& e) {
      throw NumericalError("training model " + std::to_string(i) + " aborted: " + e.what());
    }
    if (report != nullptr) {
      report->histories.push_back(result.history);
      report->train_samples.push_back(train_samples.size());
      report->val_samples.push_back(val_samples.size());
    }
    if (i < cfg.h) fill_overlay(result.net, i, cfg.ell, real_rows, overlay);
    bank.models.push_back(std::move(result.net));
  }
  return bank;
}

Matrix forecast_block_rows(const ModelBank& bank, const TimeSeriesPanel& history,
                           std::size_t block_row) {
  const auto& cfg = bank.config;
  if (history.stations() != cfg.n) {
    throw DataError("history has " + std::to_string(history.stations()) +
                    " stations, bank expects " + std::to_string(cfg.n));
  }
  if (block_row < cfg.ell || block_row > history.steps()) {
    throw DataError("insufficient history: block at row " + std::to_string(block_row) +
                    " needs " + std::to_string(cfg.ell) + " earlier rows");
  }

  // Global step of the block's first hour; any value with t0 = 1 (mod h) and
  // t0 > ell works.
  const std::uint64_t t0 = cfg.h * (cfg.ell / cfg.h + 1) + 1;
  IndexedSeries real{static_cast<std::int64_t>(t0 - cfg.ell), {}};
  for (std::size_t r = block_row - cfg.ell; r < block_row; ++r) {
    if (!history.row_complete(r)) {
      throw DataError("history row " + format_timestamp(history.timestamp(r)) +
                      " has missing values");
    }
    Vector v(cfg.n);
    for (std::size_t s = 0; s < cfg.n; ++s) v[s] = bank.normalizer.normalize(history.at(r, s), s);
    real.rows.push_back(std::move(v));
  }
  IndexedSeries buffer{static_cast<std::int64_t>(t0), {}};

  Matrix out(cfg.h, cfg.n);
  for (std::size_t i = 1; i <= cfg.h; ++i) {
    const std::uint64_t t = t0 + i - 1;
    const auto window = assemble_input(real, buffer, t, cfg);
    Vector pred = net_predict(bank.model(i), window);
    const Vector ms = denormalize(pred.span(), bank.normalizer);
    std::copy(ms.begin(), ms.end(), out.row(i - 1).begin());
    buffer.rows.push_back(std::move(pred));
  }
  return out;
}

ForecastBlock forecast_block(const ModelBank& bank, const TimeSeriesPanel& history,
                             Timestamp block_start) {
  const Timestamp offset = block_start - history.start();
  if (offset < 0 || offset % kHour != 0 ||
      static_cast<std::size_t>(offset / kHour) > history.steps()) {
    throw DataError("block start " + format_timestamp(block_start) +
                    " is not on or directly after the history grid");
  }
  return {block_start, forecast_block_rows(bank, history, static_cast<std::size_t>(offset / kHour))};
}

}  // namespace dlstf
