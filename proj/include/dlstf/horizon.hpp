#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dlstf/dataset.hpp"
#include "dlstf/lstm.hpp"
#include "dlstf/training.hpp"

namespace dlstf {

/// Bank file could not be read back.
class BankFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kBankFormatVersion = 1;

struct HorizonConfig {
  std::size_t h = 6;
  std::size_t ell = 12;
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> widths;  // one entry per model M_1..M_h
  std::vector<TrainConfig> train;                // one entry per model
  ActivationKind gate_activation = ActivationKind::Sigmoid;
  ActivationKind head_activation = ActivationKind::Identity;

  void validate() const;
};

/// M_1 gets one layer of 32 units, later models two stacked layers of 64.
std::vector<std::vector<std::size_t>> default_widths(std::size_t h);

/// Fills widths (defaults if `widths` is empty) and per-model training
/// configs; model i trains with seed base.seed + i - 1.
HorizonConfig make_horizon_config(std::size_t n, std::size_t h, std::size_t ell,
                                  const TrainConfig& base,
                                  std::vector<std::vector<std::size_t>> widths = {});

struct ModelBank {
  HorizonConfig config;
  std::vector<LstmNetwork> models;  // models[i-1] is M_i
  Normalizer normalizer;
  std::uint32_t format_version = kBankFormatVersion;

  const LstmNetwork& model(std::size_t i) const { return models.at(i - 1); }
  void validate() const;
};

struct ForecastBlock {
  Timestamp block_start = 0;
  Matrix predictions;  // h x n, m/s
};

/// Offset inside the moving horizon for global step t >= 1:
/// t mod h, with 0 mapped to h.
std::size_t model_index(std::uint64_t t, std::size_t h);

/// Steps and values available to assemble_input, keyed by global step index.
struct IndexedSeries {
  std::int64_t first_step = 0;
  std::vector<Vector> rows;  // empty Vector = unavailable

  const Vector* find(std::int64_t step) const noexcept;
};

/// Input window for global step t using model i = model_index(t, h). Real
/// values come from `real_history`, forecasts from `forecast_buffer`.
/// Throws DataError naming the first step that is not covered.
std::vector<Vector> assemble_input(const IndexedSeries& real_history,
                                   const IndexedSeries& forecast_buffer, std::uint64_t t,
                                   const HorizonConfig& cfg);

struct BankTrainReport {
  std::vector<TrainHistory> histories;  // per model
  std::vector<std::size_t> train_samples;
  std::vector<std::size_t> val_samples;
};

/// Cascade training: M_1 on real inputs only, then every M_i on windows that
/// mix real values with the offset-1..i-1 forecasts of the already trained
/// models. `train` and `val` are normalized and contiguous (val follows train).
ModelBank train_bank(const TimeSeriesPanel& train, const TimeSeriesPanel& val,
                     const Normalizer& normalizer, const HorizonConfig& cfg,
                     BankTrainReport* report = nullptr);

/// Forecasts the h steps starting at row `block_row` of `history` (m/s), from
/// the ell real rows before it. Rows at or after block_row are never read.
Matrix forecast_block_rows(const ModelBank& bank, const TimeSeriesPanel& history,
                           std::size_t block_row);

/// Forecast for the block starting at `block_start`. The history must contain
/// the ell hours before it; it may end exactly there or extend further.
ForecastBlock forecast_block(const ModelBank& bank, const TimeSeriesPanel& history,
                             Timestamp block_start);

void save_bank(const ModelBank& bank, const std::filesystem::path& path);
ModelBank load_bank(const std::filesystem::path& path);

/// In-memory versions of the bank file codec.
std::string encode_bank(const ModelBank& bank);
ModelBank decode_bank(std::string_view bytes);

}  // namespace dlstf
