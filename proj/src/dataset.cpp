#include "dlstf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "dlstf/format.hpp"

namespace dlstf {

namespace {

bool parse_fixed_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t k = pos; k < pos + len; ++k) {
    if (s[k] < '0' || s[k] > '9') return false;
    out = out * 10 + (s[k] - '0');
  }
  return true;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  for (;;) {
    const auto comma = line.find(',', begin);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(begin));
      return fields;
    }
    fields.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
}

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
  // YYYY-MM-DDTHH:00:00Z
  int y = 0, mo = 0, d = 0, h = 0;
  const bool shape_ok = text.size() == 20 && text[4] == '-' && text[7] == '-' &&
                        text[10] == 'T' && text.compare(13, 7, ":00:00Z") == 0;
  if (!shape_ok || !parse_fixed_int(text, 0, 4, y) || !parse_fixed_int(text, 5, 2, mo) ||
      !parse_fixed_int(text, 8, 2, d) || !parse_fixed_int(text, 11, 2, h) || h > 23) {
    throw DataError("malformed timestamp '" + text + "', expected YYYY-MM-DDTHH:00:00Z");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError("invalid calendar date in timestamp '" + text + "'");
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + static_cast<Timestamp>(h) * kHour;
}

std::string format_timestamp(Timestamp ts) {
  auto days = ts / 86400;
  auto secs = ts % 86400;
  if (secs < 0) {
    secs += 86400;
    --days;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>((secs / 60) % 60),
                static_cast<int>(secs % 60));
  return buf;
}

TimeSeriesPanel::TimeSeriesPanel(std::vector<std::string> station_ids, Timestamp start,
                                 std::size_t steps, std::vector<double> values)
    : station_ids_(std::move(station_ids)), start_(start), steps_(steps), values_(std::move(values)) {
  if (values_.size() != steps_ * station_ids_.size()) {
    throw DataError("panel has " + std::to_string(values_.size()) + " values for " +
                    std::to_string(steps_) + " steps x " + std::to_string(station_ids_.size()) +
                    " stations");
  }
  std::set<std::string> seen;
  for (const auto& id : station_ids_) {
    if (id.empty()) throw DataError("empty station id");
    if (!seen.insert(id).second) throw DataError("duplicate station id '" + id + "'");
  }
}

Vector TimeSeriesPanel::row_vector(std::size_t r) const {
  const auto s = row(r);
  return Vector(std::vector<double>(s.begin(), s.end()));
}

bool TimeSeriesPanel::row_complete(std::size_t r) const noexcept {
  const auto s = row(r);
  return std::none_of(s.begin(), s.end(), [](double v) { return is_missing(v); });
}

std::vector<double> TimeSeriesPanel::column(std::size_t station) const {
  std::vector<double> out(steps_);
  for (std::size_t r = 0; r < steps_; ++r) out[r] = at(r, station);
  return out;
}

std::size_t TimeSeriesPanel::row_of(Timestamp ts) const {
  const Timestamp delta = ts - start_;
  if (delta < 0 || delta % kHour != 0 || static_cast<std::size_t>(delta / kHour) >= steps_) {
    throw DataError("timestamp " + format_timestamp(ts) + " is not inside the panel (" +
                    format_timestamp(start_) + " + " + std::to_string(steps_) + " hours)");
  }
  return static_cast<std::size_t>(delta / kHour);
}

std::size_t TimeSeriesPanel::station_index(const std::string& id) const {
  const auto it = std::find(station_ids_.begin(), station_ids_.end(), id);
  if (it == station_ids_.end()) throw DataError("unknown station id '" + id + "'");
  return static_cast<std::size_t>(it - station_ids_.begin());
}

TimeSeriesPanel TimeSeriesPanel::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > steps_) {
    throw DataError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") outside panel of " + std::to_string(steps_) + " steps");
  }
  const auto n = stations();
  std::vector<double> vals(values_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                           values_.begin() + static_cast<std::ptrdiff_t>(end * n));
  return TimeSeriesPanel(station_ids_, timestamp(begin), end - begin, std::move(vals));
}

TimeSeriesPanel TimeSeriesPanel::select_stations(std::span<const std::string> ids) const {
  std::vector<std::size_t> cols;
  for (const auto& id : ids) cols.push_back(station_index(id));
  std::vector<double> vals;
  vals.reserve(steps_ * cols.size());
  for (std::size_t r = 0; r < steps_; ++r) {
    for (auto c : cols) vals.push_back(at(r, c));
  }
  return TimeSeriesPanel(std::vector<std::string>(ids.begin(), ids.end()), start_, steps_,
                         std::move(vals));
}

bool TimeSeriesPanel::operator==(const TimeSeriesPanel& other) const {
  if (station_ids_ != other.station_ids_ || start_ != other.start_ || steps_ != other.steps_) {
    return false;
  }
  // Bitwise so that NaN markers compare equal.
  return std::equal(values_.begin(), values_.end(), other.values_.begin(),
                    [](double a, double b) {
                      return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
                    });
}

TimeSeriesPanel concat(const TimeSeriesPanel& a, const TimeSeriesPanel& b) {
  if (a.station_ids() != b.station_ids()) throw DataError("concat: station lists differ");
  if (a.steps() > 0 && b.steps() > 0 && b.start() != a.timestamp(a.steps())) {
    throw DataError("concat: " + format_timestamp(b.start()) + " does not follow " +
                    format_timestamp(a.timestamp(a.steps() - 1)));
  }
  std::vector<double> vals = a.values();
  vals.insert(vals.end(), b.values().begin(), b.values().end());
  const Timestamp start = a.steps() > 0 ? a.start() : b.start();
  return TimeSeriesPanel(a.station_ids(), start, a.steps() + b.steps(), std::move(vals));
}

TimeSeriesPanel parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line.rfind("timestamp,", 0) != 0) {
    throw DataError(source + ": missing header, expected 'timestamp,<id1>,...' on line 1");
  }
  auto header = split_fields(line);
  std::vector<std::string> ids(header.begin() + 1, header.end());
  const std::size_t n = ids.size();

  std::vector<double> values;
  Timestamp start = 0;
  Timestamp prev = 0;
  std::size_t steps = 0;
  while (next_line()) {
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n + 1) {
      throw DataError(source + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(n + 1));
    }
    Timestamp ts = 0;
    try {
      ts = parse_timestamp(fields[0]);
    } catch (const DataError& e) {
      throw DataError(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (steps == 0) {
      start = ts;
    } else if (ts == prev) {
      throw DataError(source + ": duplicated timestamp " + fields[0] + " at line " +
                      std::to_string(line_no));
    } else if (ts < prev) {
      throw DataError(source + ": timestamp " + fields[0] + " at line " +
                      std::to_string(line_no) + " goes backwards");
    } else if (ts != prev + kHour) {
      throw DataError(source + ": gap before timestamp " + fields[0] + " at line " +
                      std::to_string(line_no) + " (rows must be hourly)");
    }
    prev = ts;
    for (std::size_t c = 1; c <= n; ++c) {
      const std::string& cell = fields[c];
      if (cell.empty() || cell == "NA") {
        values.push_back(kMissing);
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError(source + ": non-numeric value '" + cell + "' at line " +
                        std::to_string(line_no) + ", column " + std::to_string(c + 1) + " (" +
                        ids[c - 1] + ")");
      }
      values.push_back(v);
    }
    ++steps;
  }
  if (steps == 0) throw DataError(source + ": no data rows");
  return TimeSeriesPanel(std::move(ids), start, steps, std::move(values));
}

TimeSeriesPanel ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return parse_csv(in, path.string());
}

void write_csv(const TimeSeriesPanel& panel, std::ostream& out) {
  out << "timestamp";
  for (const auto& id : panel.station_ids()) out << ',' << id;
  out << '\n';
  for (std::size_t r = 0; r < panel.steps(); ++r) {
    out << format_timestamp(panel.timestamp(r));
    for (double v : panel.row(r)) {
      out << ',';
      if (is_missing(v)) {
        out << "NA";
      } else {
        out << format_double(v);
      }
    }
    out << '\n';
  }
}

void write_csv(const TimeSeriesPanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(panel, out);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

FillResult fill_missing(const TimeSeriesPanel& panel, std::size_t max_gap) {
  FillResult result{panel, {}};
  const std::size_t T = panel.steps();
  for (std::size_t s = 0; s < panel.stations(); ++s) {
    std::size_t r = 0;
    while (r < T) {
      if (!is_missing(panel.at(r, s))) {
        ++r;
        continue;
      }
      const std::size_t first = r;
      while (r < T && is_missing(panel.at(r, s))) ++r;
      const std::size_t len = r - first;
      const bool interior = first > 0 && r < T;
      const bool fill = interior && len <= max_gap;
      if (fill) {
        const double left = panel.at(first - 1, s);
        const double right = panel.at(r, s);
        const double span = static_cast<double>(len + 1);
        for (std::size_t k = 0; k < len; ++k) {
          const double w = static_cast<double>(k + 1) / span;
          result.panel.at(first + k, s) = left + (right - left) * w;
        }
      }
      result.runs.push_back({s, first, len, fill});
    }
  }
  return result;
}

double Normalizer::range(std::size_t station) const noexcept {
  const double r = max[station] - min[station];
  return r > 0.0 ? r : 1.0;
}

NormalizerFit fit_normalizer(const TimeSeriesPanel& panel, RowRange train_rows) {
  if (train_rows.begin >= train_rows.end || train_rows.end > panel.steps()) {
    throw DataError("fit_normalizer: empty or out-of-range training rows");
  }
  NormalizerFit fit;
  const std::size_t n = panel.stations();
  fit.normalizer.min.assign(n, std::numeric_limits<double>::infinity());
  fit.normalizer.max.assign(n, -std::numeric_limits<double>::infinity());
  for (std::size_t r = train_rows.begin; r < train_rows.end; ++r) {
    for (std::size_t s = 0; s < n; ++s) {
      const double v = panel.at(r, s);
      if (is_missing(v)) continue;
      fit.normalizer.min[s] = std::min(fit.normalizer.min[s], v);
      fit.normalizer.max[s] = std::max(fit.normalizer.max[s], v);
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!std::isfinite(fit.normalizer.min[s])) {
      throw DataError("station '" + panel.station_ids()[s] +
                      "' has no observations in the training range");
    }
    if (fit.normalizer.max[s] == fit.normalizer.min[s]) {
      fit.warnings.push_back("station '" + panel.station_ids()[s] + "' is constant (" +
                             format_double(fit.normalizer.min[s]) +
                             ") on the training range; using range 1.0");
    }
  }
  return fit;
}

TimeSeriesPanel normalize(const TimeSeriesPanel& panel, const Normalizer& nz) {
  if (nz.stations() != panel.stations()) {
    throw DataError("normalizer has " + std::to_string(nz.stations()) + " stations, panel has " +
                    std::to_string(panel.stations()));
  }
  TimeSeriesPanel out = panel;
  for (std::size_t r = 0; r < out.steps(); ++r) {
    for (std::size_t s = 0; s < out.stations(); ++s) {
      double& v = out.at(r, s);
      if (!is_missing(v)) v = nz.normalize(v, s);
    }
  }
  return out;
}

Vector denormalize(std::span<const double> values, const Normalizer& nz) {
  if (values.size() != nz.stations()) {
    throw DataError("denormalize: " + std::to_string(values.size()) + " values for " +
                    std::to_string(nz.stations()) + " stations");
  }
  Vector out(values.size());
  for (std::size_t s = 0; s < values.size(); ++s) out[s] = nz.denormalize(values[s], s);
  return out;
}

SplitSpec split_by_fraction(const TimeSeriesPanel& panel, double train_fraction,
                            double val_fraction) {
  if (!(train_fraction > 0.0) || !(val_fraction > 0.0) || train_fraction + val_fraction >= 1.0) {
    throw DataError("split fractions must be positive and leave room for a test range");
  }
  const auto T = static_cast<double>(panel.steps());
  const auto train_rows = static_cast<std::size_t>(std::llround(T * train_fraction));
  const auto val_rows = static_cast<std::size_t>(std::llround(T * val_fraction));
  if (train_rows == 0 || val_rows == 0 || train_rows + val_rows >= panel.steps()) {
    throw DataError("panel of " + std::to_string(panel.steps()) + " steps is too short to split");
  }
  const Timestamp t0 = panel.start();
  const Timestamp t1 = panel.timestamp(train_rows);
  const Timestamp t2 = panel.timestamp(train_rows + val_rows);
  const Timestamp t3 = panel.timestamp(panel.steps());
  return {{t0, t1}, {t1, t2}, {t2, t3}};
}

SplitPanels split(const TimeSeriesPanel& panel, const SplitSpec& spec) {
  const TimeRange* ranges[] = {&spec.train, &spec.val, &spec.test};
  const char* names[] = {"train", "validation", "test"};
  for (int k = 0; k < 3; ++k) {
    if (ranges[k]->end <= ranges[k]->begin) {
      throw DataError(std::string(names[k]) + " range is empty");
    }
  }
  if (spec.train.end > spec.val.begin || spec.val.end > spec.test.begin) {
    throw DataError("split ranges overlap or are out of order");
  }
  const Timestamp panel_end = panel.timestamp(panel.steps());
  auto rows = [&](const TimeRange& r, const char* name) {
    if (r.begin < panel.start() || r.end > panel_end) {
      throw DataError(std::string(name) + " range " + format_timestamp(r.begin) + " .. " +
                      format_timestamp(r.end) + " lies outside the panel");
    }
    // Snap to the hourly grid: first row at or after begin, rows strictly before end.
    const auto first = static_cast<std::size_t>((r.begin - panel.start() + kHour - 1) / kHour);
    const auto last = static_cast<std::size_t>((r.end - panel.start() + kHour - 1) / kHour);
    if (first >= last) throw DataError(std::string(name) + " range holds no rows");
    return panel.slice(first, last);
  };
  return {rows(spec.train, names[0]), rows(spec.val, names[1]), rows(spec.test, names[2])};
}

const Vector* ForecastOverlay::find(std::size_t offset, std::size_t row) const noexcept {
  if (offset == 0 || offset > table_.size() || row >= table_[offset - 1].size()) return nullptr;
  const Vector& v = table_[offset - 1][row];
  return v.empty() ? nullptr : &v;
}

void ForecastOverlay::set(std::size_t offset, std::size_t row, Vector v) {
  if (offset == 0 || offset > table_.size() || row >= table_[offset - 1].size()) {
    throw std::out_of_range("ForecastOverlay::set: offset " + std::to_string(offset) + ", row " +
                            std::to_string(row));
  }
  table_[offset - 1][row] = std::move(v);
}

SampleSet make_samples(const TimeSeriesPanel& panel, const ForecastOverlay& overlay,
                       std::size_t ell, std::size_t i) {
  if (i < 1) throw std::invalid_argument("make_samples: model offset i must be >= 1");
  if (ell < 1) throw std::invalid_argument("make_samples: ell must be >= 1");

  const std::size_t T = panel.steps();
  std::vector<Vector> rows(T);
  for (std::size_t r = 0; r < T; ++r) {
    if (panel.row_complete(r)) rows[r] = panel.row_vector(r);
  }
  auto real = [&](std::int64_t step) -> const Vector* {
    if (step < 0 || static_cast<std::size_t>(step) >= T) return nullptr;
    const Vector& v = rows[static_cast<std::size_t>(step)];
    return v.empty() ? nullptr : &v;
  };
  auto forecast = [&](std::size_t offset, std::int64_t step) -> const Vector* {
    if (step < 0) return nullptr;
    return overlay.find(offset, static_cast<std::size_t>(step));
  };

  SampleSet set;
  std::vector<Vector> window;
  for (std::size_t t = ell; t < T; ++t) {
    std::int64_t missing = 0;
    const Vector* target = real(static_cast<std::int64_t>(t));
    if (target == nullptr ||
        !assemble_window(real, forecast, static_cast<std::int64_t>(t), i, ell, window, missing)) {
      ++set.skipped;
      continue;
    }
    set.samples.push_back({window, *target});
    set.target_rows.push_back(t);
  }
  return set;
}

}  // namespace dlstf
