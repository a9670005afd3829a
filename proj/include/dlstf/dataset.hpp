#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlstf/lstm.hpp"
#include "dlstf/tensor.hpp"

namespace dlstf {

/// Malformed or unusable input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;
inline constexpr Timestamp kHour = 3600;

/// Parses exactly `YYYY-MM-DDTHH:00:00Z`.
Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp ts);

/// Missing observations are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

/// n stations observed hourly over T consecutive hours.
class TimeSeriesPanel {
 public:
  TimeSeriesPanel() = default;
  /// Validates the hourly grid and the T x n shape.
  TimeSeriesPanel(std::vector<std::string> station_ids, Timestamp start, std::size_t steps,
                  std::vector<double> values);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t stations() const noexcept { return station_ids_.size(); }
  const std::vector<std::string>& station_ids() const noexcept { return station_ids_; }
  Timestamp start() const noexcept { return start_; }
  Timestamp timestamp(std::size_t row) const noexcept {
    return start_ + static_cast<Timestamp>(row) * kHour;
  }

  double at(std::size_t row, std::size_t station) const noexcept {
    return values_[row * stations() + station];
  }
  double& at(std::size_t row, std::size_t station) noexcept {
    return values_[row * stations() + station];
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * stations(), stations()};
  }
  Vector row_vector(std::size_t r) const;
  bool row_complete(std::size_t r) const noexcept;
  std::vector<double> column(std::size_t station) const;
  const std::vector<double>& values() const noexcept { return values_; }

  /// Row of `ts`, or throws DataError if it is off the grid.
  std::size_t row_of(Timestamp ts) const;
  std::size_t station_index(const std::string& id) const;

  /// Rows [begin, end).
  TimeSeriesPanel slice(std::size_t begin, std::size_t end) const;
  TimeSeriesPanel select_stations(std::span<const std::string> ids) const;

  bool operator==(const TimeSeriesPanel& other) const;

 private:
  std::vector<std::string> station_ids_;
  Timestamp start_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> values_;
};

/// Joins two panels with the same stations where `b` starts one hour after `a` ends.
TimeSeriesPanel concat(const TimeSeriesPanel& a, const TimeSeriesPanel& b);

TimeSeriesPanel parse_csv(std::istream& in, const std::string& source = "<stream>");
TimeSeriesPanel ingest_csv(const std::filesystem::path& path);
void write_csv(const TimeSeriesPanel& panel, std::ostream& out);
void write_csv(const TimeSeriesPanel& panel, const std::filesystem::path& path);

struct GapRun {
  std::size_t station = 0;
  std::size_t first_row = 0;
  std::size_t length = 0;
  bool filled = false;

  bool operator==(const GapRun&) const = default;
};

struct FillResult {
  TimeSeriesPanel panel;
  std::vector<GapRun> runs;  // every missing run, filled or not, by station then row
};

/// Linearly interpolates interior runs of at most max_gap missing values.
FillResult fill_missing(const TimeSeriesPanel& panel, std::size_t max_gap);

/// Per-station min-max scaling fitted on the training range.
struct Normalizer {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t stations() const noexcept { return min.size(); }
  /// max - min, or 1.0 for a constant station.
  double range(std::size_t station) const noexcept;
  double normalize(double x, std::size_t station) const noexcept {
    return (x - min[station]) / range(station);
  }
  double denormalize(double x, std::size_t station) const noexcept {
    return x * range(station) + min[station];
  }

  bool operator==(const Normalizer&) const = default;
};

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

struct NormalizerFit {
  Normalizer normalizer;
  std::vector<std::string> warnings;
};

NormalizerFit fit_normalizer(const TimeSeriesPanel& panel, RowRange train_rows);
TimeSeriesPanel normalize(const TimeSeriesPanel& panel, const Normalizer& nz);
Vector denormalize(std::span<const double> values, const Normalizer& nz);

/// Half-open timestamp interval [begin, end).
struct TimeRange {
  Timestamp begin = 0;
  Timestamp end = 0;
};

struct SplitSpec {
  TimeRange train;
  TimeRange val;
  TimeRange test;
};

struct SplitPanels {
  TimeSeriesPanel train;
  TimeSeriesPanel val;
  TimeSeriesPanel test;
};

/// Consecutive train/val/test ranges by fraction of rows; the test range takes the remainder.
SplitSpec split_by_fraction(const TimeSeriesPanel& panel, double train_fraction,
                            double val_fraction);
SplitPanels split(const TimeSeriesPanel& panel, const SplitSpec& spec);

/// Forecasts for every (offset, row) pair produced during cascade training.
/// Offset k means "predicted as the k-th step of a block", k >= 1.
class ForecastOverlay {
 public:
  ForecastOverlay() = default;
  ForecastOverlay(std::size_t offsets, std::size_t rows) : table_(offsets, std::vector<Vector>(rows)) {}

  std::size_t offsets() const noexcept { return table_.size(); }
  const Vector* find(std::size_t offset, std::size_t row) const noexcept;
  void set(std::size_t offset, std::size_t row, Vector v);

 private:
  std::vector<std::vector<Vector>> table_;
};

/// Builds the length-`ell` input window for the model at offset `i`
/// predicting step `t`: real steps t-ell .. t-i, then forecasts for
/// t-i+1 .. t-1, where the forecast for step t-i+m was made at offset m.
/// When i-1 >= ell the window is the last ell forecasts only. `real(step)` and
/// `forecast(offset, step)` return nullptr when a value is unavailable; the
/// first unavailable step is reported through `missing_step`.
template <typename RealLookup, typename ForecastLookup>
bool assemble_window(RealLookup&& real, ForecastLookup&& forecast, std::int64_t t, std::size_t i,
                     std::size_t ell, std::vector<Vector>& out, std::int64_t& missing_step) {
  out.clear();
  out.reserve(ell);
  const auto l = static_cast<std::int64_t>(ell);
  const auto ii = static_cast<std::int64_t>(i);
  for (std::int64_t step = t - l; step < t; ++step) {
    const Vector* v = nullptr;
    if (step <= t - ii) {
      v = real(step);
    } else {
      const std::int64_t offset = step - (t - ii);
      v = forecast(static_cast<std::size_t>(offset), step);
    }
    if (v == nullptr) {
      missing_step = step;
      return false;
    }
    out.push_back(*v);
  }
  return true;
}

struct SampleSet {
  std::vector<Sample> samples;
  std::vector<std::size_t> target_rows;
  std::size_t skipped = 0;  // targets at rows >= ell that could not be built
};

/// Training samples for the model at offset `i` over a normalized panel.
SampleSet make_samples(const TimeSeriesPanel& panel, const ForecastOverlay& overlay,
                       std::size_t ell, std::size_t i);

}  // namespace dlstf
