#pragma once

// End-to-end steps shared by the command-line tool and the acceptance suite:
// repair and split a raw panel, fit and evaluate a bank, run baselines.

#include <optional>
#include <string>
#include <vector>

#include "dlstf/baselines.hpp"
#include "dlstf/dataset.hpp"
#include "dlstf/horizon.hpp"

namespace dlstf {

struct SplitOptions {
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  // When test_begin is set, val_begin must be too; the ranges become
  // [start, val_begin), [val_begin, test_begin), [test_begin, test_end or end).
  std::optional<Timestamp> val_begin;
  std::optional<Timestamp> test_begin;
  std::optional<Timestamp> test_end;
};

struct PreparedData {
  TimeSeriesPanel panel;  // m/s, short gaps filled
  std::vector<GapRun> gaps;
  SplitSpec spec;
  RowRange train;
  RowRange val;
  RowRange test;
};

PreparedData prepare_data(const TimeSeriesPanel& raw, const SplitOptions& split,
                          std::size_t max_gap);

struct FittedBank {
  ModelBank bank;
  BankTrainReport report;
  std::vector<std::string> warnings;
};

/// Fits the normalizer on the training rows and trains the cascade.
FittedBank fit_bank(const PreparedData& data, const HorizonConfig& cfg);

/// Forecaster backed by `bank`; the bank must outlive it.
Forecaster bank_forecaster(const ModelBank& bank);

/// Walks the test rows block by block with real history taken from the rows before each block.
EvalResult evaluate_on_test(const Forecaster& forecaster, const PreparedData& data,
                            std::size_t h, std::size_t history);

/// Per-station AR(p) models fitted on the training rows.
std::vector<ArModel> fit_ar_models(const PreparedData& data, std::size_t p);

}  // namespace dlstf
