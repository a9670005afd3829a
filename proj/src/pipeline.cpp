#include "dlstf/pipeline.hpp"

namespace dlstf {

PreparedData prepare_data(const TimeSeriesPanel& raw, const SplitOptions& split_opts,
                          std::size_t max_gap) {
  FillResult filled = fill_missing(raw, max_gap);
  PreparedData data{std::move(filled.panel), std::move(filled.runs), {}, {}, {}, {}};
  const TimeSeriesPanel& panel = data.panel;

  if (split_opts.test_begin) {
    if (!split_opts.val_begin) throw DataError("test_begin requires val_begin");
    const Timestamp end = split_opts.test_end.value_or(panel.timestamp(panel.steps()));
    data.spec = {{panel.start(), *split_opts.val_begin},
                 {*split_opts.val_begin, *split_opts.test_begin},
                 {*split_opts.test_begin, end}};
  } else {
    data.spec = split_by_fraction(panel, split_opts.train_fraction, split_opts.val_fraction);
  }
  // Validates ordering and bounds.
  const SplitPanels parts = split(panel, data.spec);
  const std::size_t train_begin = panel.row_of(parts.train.start());
  const std::size_t val_begin = panel.row_of(parts.val.start());
  const std::size_t test_begin = panel.row_of(parts.test.start());
  data.train = {train_begin, train_begin + parts.train.steps()};
  data.val = {val_begin, val_begin + parts.val.steps()};
  data.test = {test_begin, test_begin + parts.test.steps()};
  if (data.train.end != data.val.begin) {
    throw DataError("validation range must start right after the training range");
  }
  return data;
}

FittedBank fit_bank(const PreparedData& data, const HorizonConfig& cfg) {
  FittedBank out;
  NormalizerFit fit = fit_normalizer(data.panel, data.train);
  out.warnings = std::move(fit.warnings);
  const TimeSeriesPanel normalized = normalize(data.panel, fit.normalizer);
  out.bank = train_bank(normalized.slice(data.train.begin, data.train.end),
                        normalized.slice(data.val.begin, data.val.end), fit.normalizer, cfg,
                        &out.report);
  return out;
}

Forecaster bank_forecaster(const ModelBank& bank) {
  return [&bank](const TimeSeriesPanel& history, std::size_t h) {
    if (h != bank.config.h) {
      throw std::invalid_argument("bank forecasts blocks of " + std::to_string(bank.config.h) +
                                  " steps, asked for " + std::to_string(h));
    }
    return forecast_block_rows(bank, history, history.steps());
  };
}

EvalResult evaluate_on_test(const Forecaster& forecaster, const PreparedData& data,
                            std::size_t h, std::size_t history) {
  EvalConfig cfg;
  cfg.h = h;
  cfg.history = history;
  cfg.begin_row = data.test.begin;
  cfg.end_row = data.test.end;
  return evaluate(forecaster, data.panel, cfg);
}

std::vector<ArModel> fit_ar_models(const PreparedData& data, std::size_t p) {
  std::vector<ArModel> models;
  for (std::size_t s = 0; s < data.panel.stations(); ++s) {
    const auto series = data.panel.column(s);
    models.push_back(ar_fit(series, p, data.train, data.panel.station_ids()[s]));
  }
  return models;
}

}  // namespace dlstf
