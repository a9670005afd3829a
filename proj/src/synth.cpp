#include "dlstf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "dlstf/format.hpp"
#include "dlstf/rng.hpp"

namespace dlstf {

TimeSeriesPanel synth_generate(const SynthConfig& cfg) {
  if (cfg.n < 2) throw std::invalid_argument("synth: need at least 2 stations");
  if (cfg.steps < 100) throw std::invalid_argument("synth: need at least 100 steps");
  if (!(cfg.coupling >= 0.0 && cfg.coupling <= 1.0)) {
    throw std::invalid_argument("synth: coupling must lie in [0, 1]");
  }
  if (!(cfg.noise >= 0.0)) throw std::invalid_argument("synth: noise must be >= 0");

  Rng rng(cfg.seed);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double phase_a = rng.uniform(0.0, two_pi);
  const double phase_b = rng.uniform(0.0, two_pi);
  std::vector<std::size_t> lags(cfg.n);
  for (auto& lag : lags) lag = 1 + static_cast<std::size_t>(rng.below(3));

  auto driver = [&](double t) {
    return std::numbers::sqrt2 *
           (0.6 * std::sin(two_pi * t / 24.0 + phase_a) + 0.8 * std::sin(two_pi * t / 67.0 + phase_b));
  };

  constexpr double phi = 0.7;
  const double innovation_sd = std::sqrt(1.0 - phi * phi);
  const double c = cfg.coupling;
  const double own = std::sqrt(1.0 - c * c);

  // Local processes start from their stationary distribution.
  std::vector<double> a(cfg.n), a_prev(cfg.n);
  for (auto& v : a_prev) v = rng.normal();

  std::vector<double> values(cfg.steps * cfg.n);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    for (std::size_t j = 0; j < cfg.n; ++j) a[j] = phi * a_prev[j] + innovation_sd * rng.normal();
    for (std::size_t j = 0; j < cfg.n; ++j) {
      const double shared = driver(static_cast<double>(t) - static_cast<double>(lags[j]));
      const double z = c * shared + 0.5 * c * a_prev[synth_upwind(j, cfg.n)] + own * a[j];
      values[t * cfg.n + j] = 6.0 + 2.5 * z + cfg.noise * rng.normal();
    }
    std::swap(a, a_prev);
  }

  const double lowest = *std::min_element(values.begin(), values.end());
  if (lowest < 0.0) {
    for (double& v : values) v -= lowest;
  }

  std::vector<std::string> ids;
  for (std::size_t j = 0; j < cfg.n; ++j) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%02zu", j + 1);
    ids.emplace_back(buf);
  }
  return TimeSeriesPanel(std::move(ids), parse_timestamp("2014-01-01T00:00:00Z"), cfg.steps,
                         std::move(values));
}

double lagged_correlation(std::span<const double> a, std::span<const double> b, std::size_t lag) {
  if (a.size() != b.size() || a.size() <= lag + 1) {
    throw std::invalid_argument("lagged_correlation: series too short or of unequal length");
  }
  const std::size_t m = a.size() - lag;
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    mean_a += a[k + lag];
    mean_b += b[k];
  }
  mean_a /= static_cast<double>(m);
  mean_b /= static_cast<double>(m);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double da = a[k + lag] - mean_a;
    const double db = b[k] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  return cov / std::sqrt(var_a * var_b);
}

std::vector<std::filesystem::path> emit_plot_data(const EvalTrace& trace,
                                                  const TimeSeriesPanel& actuals,
                                                  std::span<const std::string> stations,
                                                  const std::filesystem::path& out_dir) {
  std::vector<std::size_t> columns;
  for (const auto& id : stations) columns.push_back(actuals.station_index(id));
  std::filesystem::create_directories(out_dir);

  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    return out;
  };

  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < stations.size(); ++k) {
    const auto path = out_dir / (stations[k] + ".csv");
    auto out = open(path);
    out << "time_index,actual,forecast\n";
    for (std::size_t p = 0; p < trace.rows.size(); ++p) {
      const std::size_t row = trace.rows[p];
      const double actual = actuals.at(row, columns[k]);
      out << row << ',' << (is_missing(actual) ? std::string("NA") : format_double(actual)) << ','
          << format_double(trace.forecasts[p][columns[k]]) << '\n';
    }
    written.push_back(path);
  }

  const auto index_path = out_dir / "index.csv";
  auto index = open(index_path);
  index << "station,file,points\n";
  for (const auto& id : stations) index << id << ',' << id << ".csv," << trace.rows.size() << '\n';
  written.push_back(index_path);
  return written;
}

}  // namespace dlstf
