#include "dlstf/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>

#include "dlstf/format.hpp"
#include "dlstf/synth.hpp"

namespace dlstf {

namespace {

namespace fs = std::filesystem;

/// Flags that override config keys, shared by the data-driven subcommands.
struct Overrides {
  std::string config_path;
  bool dump = false;
  std::map<std::string, std::string> values;

  void attach(CLI::App& sub, std::initializer_list<std::pair<const char*, const char*>> flags) {
    sub.add_option("--config", config_path, "Flat key = value config file");
    sub.add_flag("--dump-config", dump, "Print the resolved config and exit");
    for (const auto& [flag, key] : flags) {
      sub.add_option(flag, values[key], std::string("Overrides config key '") + key + "'");
    }
  }
};

constexpr std::initializer_list<std::pair<const char*, const char*>> kTrainingFlags = {
    {"--seed", "seed"},
    {"--h", "h"},
    {"--ell", "ell"},
    {"--widths", "widths"},
    {"--learning-rate", "learning_rate"},
    {"--batch-size", "batch_size"},
    {"--max-epochs", "max_epochs"},
    {"--patience", "patience"},
    {"--clip-norm", "clip_norm"},
    {"--max-gap", "max_gap"},
    {"--train-fraction", "train_fraction"},
    {"--val-fraction", "val_fraction"},
    {"--val-begin", "val_begin"},
    {"--test-begin", "test_begin"},
    {"--test-end", "test_end"},
};

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv("DLSTF_SEED");
  if (text == nullptr || *text == '\0') return std::nullopt;
  std::uint64_t v = 0;
  const std::string s(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError("DLSTF_SEED is not an unsigned integer: '" + s + "'");
  }
  return v;
}

/// Defaults, then DLSTF_SEED, then the config file, then flags that were given.
RunConfig resolve_config(const CLI::App& sub, const Overrides& ov) {
  RunConfig cfg;
  if (auto seed = env_seed()) cfg.seed = *seed;
  if (!ov.config_path.empty()) {
    std::ifstream in(ov.config_path);
    if (!in) throw UsageError("cannot open config file '" + ov.config_path + "'");
    apply_config_text(cfg, in, ov.config_path);
  }
  for (const auto& [key, value] : ov.values) {
    if (sub.count("--" + [&] {
          std::string flag = key;
          std::replace(flag.begin(), flag.end(), '_', '-');
          return flag;
        }()) > 0) {
      apply_config_value(cfg, key, value);
    }
  }
  return cfg;
}

std::string config_digest(const RunConfig& cfg) { return digest_hex(fnv1a64(dump_config(cfg))); }

void log_run(std::ostream& err, const std::string& command, const RunConfig& cfg) {
  err << "dlstf " << command << ": seed=" << cfg.seed << " config_digest=" << config_digest(cfg)
      << '\n';
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return digest_hex(fnv1a64(bytes));
}

/// Plain-text key = value record of a run: config, seed and produced-file digests.
void write_manifest(const fs::path& manifest, const std::string& command, const RunConfig& cfg,
                    const std::vector<fs::path>& files) {
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + manifest.string() + "'");
  out << "command = " << command << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "config_digest = " << config_digest(cfg) << '\n';
  std::istringstream dump(dump_config(cfg));
  for (std::string line; std::getline(dump, line);) out << "config." << line << '\n';
  for (const auto& f : files) {
    out << "file." << f.filename().string() << " = " << file_digest(f) << '\n';
  }
}

fs::path manifest_for(const fs::path& output) {
  return fs::path(output.string() + ".manifest");
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw UsageError(std::string("missing required ") + what);
}

void write_report(const ErrorReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write report '" + path.string() + "'");
  write_report_csv(report, out);
  if (!out) throw DataError("write failed for report '" + path.string() + "'");
}

void print_mean(std::ostream& out, const ErrorReport& report) {
  out << "MEAN mae=" << format_double(report.mean.mae)
      << " rmse=" << format_double(report.mean.rmse) << " nrmse="
      << (report.mean.nrmse ? format_double(*report.mean.nrmse) : std::string("NA")) << '\n';
}

PreparedData load_data(const RunConfig& cfg, std::ostream& err) {
  require(cfg.data, "--data");
  PreparedData data = prepare_data(ingest_csv(cfg.data), cfg.split, cfg.max_gap);
  std::size_t unfilled = 0;
  for (const auto& run : data.gaps) unfilled += run.filled ? 0 : 1;
  if (unfilled > 0) {
    err << "dlstf: " << unfilled << " missing-value runs longer than max_gap=" << cfg.max_gap
        << " left unfilled\n";
  }
  return data;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require(cfg.out, "--out");
  const PreparedData data = load_data(cfg, err);
  const HorizonConfig hc = cfg.horizon(data.panel.stations());
  FittedBank fitted = fit_bank(data, hc);
  for (const auto& w : fitted.warnings) err << "dlstf: warning: " << w << '\n';
  save_bank(fitted.bank, cfg.out);
  write_manifest(manifest_for(cfg.out), "train", cfg, {fs::path(cfg.out)});
  for (std::size_t i = 0; i < fitted.report.histories.size(); ++i) {
    const auto& hist = fitted.report.histories[i];
    out << "model " << i + 1 << ": train_samples=" << fitted.report.train_samples[i]
        << " val_samples=" << fitted.report.val_samples[i] << " epochs=" << hist.stopped_epoch
        << " best_epoch=" << hist.best_epoch
        << " best_val_mae=" << format_double(hist.val_loss[hist.best_epoch - 1]) << '\n';
  }
  out << "wrote " << cfg.out << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& model, const std::string& report_path,
                 std::ostream& out, std::ostream& err) {
  require(model, "--model");
  require(report_path, "--report");
  const ModelBank bank = load_bank(model);
  const PreparedData data = load_data(cfg, err);
  const EvalResult result =
      evaluate_on_test(bank_forecaster(bank), data, bank.config.h, bank.config.ell);
  write_report(result.report, report_path);
  write_manifest(manifest_for(report_path), "evaluate", cfg, {fs::path(report_path)});
  out << "blocks=" << result.blocks << '\n';
  print_mean(out, result.report);
  return kExitOk;
}

int cmd_baseline(const RunConfig& cfg, const std::string& method, std::size_t order,
                 const std::string& report_path, std::ostream& out, std::ostream& err) {
  require(report_path, "--report");
  const PreparedData data = load_data(cfg, err);
  Forecaster forecaster;
  std::size_t history = cfg.ell;
  if (method == "persistence") {
    forecaster = persistence_forecaster();
  } else if (method == "ar") {
    if (order < 1) throw UsageError("--order must be >= 1");
    forecaster = ar_forecaster(fit_ar_models(data, order));
    history = std::max(history, order);
  } else {
    throw UsageError("unknown baseline method '" + method + "' (persistence|ar)");
  }
  const EvalResult result = evaluate_on_test(forecaster, data, cfg.h, history);
  write_report(result.report, report_path);
  write_manifest(manifest_for(report_path), "baseline", cfg, {fs::path(report_path)});
  out << "blocks=" << result.blocks << '\n';
  print_mean(out, result.report);
  return kExitOk;
}

int cmd_forecast(const RunConfig& cfg, const std::string& model, const std::string& at,
                 const std::string& out_path, std::ostream& out) {
  require(model, "--model");
  require(cfg.data, "--data");
  require(at, "--at");
  const ModelBank bank = load_bank(model);
  const TimeSeriesPanel panel = fill_missing(ingest_csv(cfg.data), cfg.max_gap).panel;
  const Timestamp start = parse_timestamp(at);
  const ForecastBlock block = forecast_block(bank, panel, start);

  std::ostringstream csv;
  csv << "step,timestamp";
  for (const auto& id : panel.station_ids()) csv << ',' << id;
  csv << '\n';
  for (std::size_t k = 0; k < block.predictions.rows(); ++k) {
    csv << k + 1 << ',' << format_timestamp(start + static_cast<Timestamp>(k) * kHour);
    for (double v : block.predictions.row(k)) csv << ',' << format_double(v);
    csv << '\n';
  }
  if (out_path.empty()) {
    out << csv.str();
  } else {
    std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot write '" + out_path + "'");
    file << csv.str();
    file.close();
    write_manifest(manifest_for(out_path), "forecast", cfg, {fs::path(out_path)});
  }
  return kExitOk;
}

int cmd_plot(const RunConfig& cfg, const std::string& model, std::vector<std::string> stations,
             const std::string& out_dir, std::ostream& out, std::ostream& err) {
  require(model, "--model");
  require(out_dir, "--out");
  if (stations.empty()) throw UsageError("missing required --stations");
  const ModelBank bank = load_bank(model);
  const PreparedData data = load_data(cfg, err);
  const EvalResult result =
      evaluate_on_test(bank_forecaster(bank), data, bank.config.h, bank.config.ell);
  const auto files = emit_plot_data(result.trace, data.panel, stations, out_dir);
  write_manifest(fs::path(out_dir) / "run.manifest", "plot", cfg, files);
  out << "wrote " << files.size() << " files to " << out_dir << '\n';
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t layers, std::size_t hidden, std::size_t n,
                  std::size_t steps, double eps, std::ostream& out) {
  constexpr double kTolerance = 1e-6;
  const GradCheckCase gc = random_gradcheck_case(seed, layers, hidden, n, steps);
  const double err = gradient_check(gc.net, gc.sample, eps);
  out << "seed=" << seed << " parameters=" << gc.net.parameter_count()
      << " max_relative_error=" << format_double(err) << " tolerance=" << format_double(kTolerance)
      << (err < kTolerance ? " PASS" : " FAIL") << '\n';
  return err < kTolerance ? kExitOk : kExitNumerical;
}

int cmd_synth(const SynthConfig& sc, const std::string& out_path, std::ostream& out) {
  require(out_path, "--out");
  const TimeSeriesPanel panel = synth_generate(sc);
  write_csv(panel, fs::path(out_path));
  RunConfig record;
  record.seed = sc.seed;
  record.out = out_path;
  write_manifest(manifest_for(out_path), "synth", record, {fs::path(out_path)});
  out << "wrote " << panel.steps() << " rows x " << panel.stations() << " stations to "
      << out_path << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"dlstf: spatio-temporal multi-step forecasting with per-offset LSTM models"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");

  // train
  auto* train = app.add_subcommand("train", "Train a model bank");
  train->set_help_flag("--help", "Print this help message and exit");
  Overrides train_ov;
  train_ov.attach(*train, kTrainingFlags);
  train->add_option("--data", train_ov.values["data"], "Input CSV");
  train->add_option("--out", train_ov.values["out"], "Output bank file");

  // forecast
  auto* forecast = app.add_subcommand("forecast", "Forecast one block");
  forecast->set_help_flag("--help", "Print this help message and exit");
  Overrides forecast_ov;
  forecast_ov.attach(*forecast, {{"--max-gap", "max_gap"}});
  forecast->add_option("--data", forecast_ov.values["data"], "History CSV");
  std::string forecast_model, forecast_at, forecast_out;
  forecast->add_option("--model", forecast_model, "Bank file");
  forecast->add_option("--at", forecast_at, "Block start, YYYY-MM-DDTHH:00:00Z");
  forecast->add_option("--out", forecast_out, "Write the block here instead of stdout");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a bank on the test range");
  evaluate_cmd->set_help_flag("--help", "Print this help message and exit");
  Overrides eval_ov;
  eval_ov.attach(*evaluate_cmd, kTrainingFlags);
  evaluate_cmd->add_option("--data", eval_ov.values["data"], "Input CSV");
  std::string eval_model, eval_report;
  evaluate_cmd->add_option("--model", eval_model, "Bank file");
  evaluate_cmd->add_option("--report", eval_report, "Output report CSV");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Score persistence or AR(p) on the test range");
  baseline->set_help_flag("--help", "Print this help message and exit");
  Overrides base_ov;
  base_ov.attach(*baseline, kTrainingFlags);
  baseline->add_option("--data", base_ov.values["data"], "Input CSV");
  std::string base_method = "persistence", base_report;
  std::size_t base_order = 3;
  baseline->add_option("--method", base_method, "persistence | ar");
  baseline->add_option("--order", base_order, "AR order p");
  baseline->add_option("--report", base_report, "Output report CSV");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Check BPTT against finite differences");
  gradcheck->set_help_flag("--help", "Print this help message and exit");
  std::string gc_seed;
  std::size_t gc_layers = 2, gc_hidden = 8, gc_n = 3, gc_steps = 5;
  double gc_eps = 1e-5;
  gradcheck->add_option("--seed", gc_seed, "Network seed (falls back to DLSTF_SEED)");
  gradcheck->add_option("--layers", gc_layers, "Stacked LSTM layers");
  gradcheck->add_option("--hidden", gc_hidden, "Hidden units per layer");
  gradcheck->add_option("--n", gc_n, "Input/output width");
  gradcheck->add_option("--steps", gc_steps, "Sequence length");
  gradcheck->add_option("--eps", gc_eps, "Finite-difference step");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic coupled panel");
  synth->set_help_flag("--help", "Print this help message and exit");
  SynthConfig sc;
  std::string synth_seed, synth_out;
  synth->add_option("--n", sc.n, "Stations");
  synth->add_option("--T", sc.steps, "Hours");
  synth->add_option("--seed", synth_seed, "Seed (falls back to DLSTF_SEED)");
  synth->add_option("--coupling", sc.coupling, "Upwind coupling strength in [0, 1]");
  synth->add_option("--noise", sc.noise, "Observation noise standard deviation (m/s)");
  synth->add_option("--out", synth_out, "Output CSV");

  // plot
  auto* plot = app.add_subcommand("plot", "Write per-station forecast/actual series");
  plot->set_help_flag("--help", "Print this help message and exit");
  Overrides plot_ov;
  plot_ov.attach(*plot, kTrainingFlags);
  plot->add_option("--data", plot_ov.values["data"], "Input CSV");
  std::string plot_model, plot_out;
  std::vector<std::string> plot_stations;
  plot->add_option("--model", plot_model, "Bank file");
  plot->add_option("--stations", plot_stations, "Station ids")->delimiter(',');
  plot->add_option("--out", plot_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "dlstf: " << e.what() << '\n' << "Run with --help for usage.\n";
    return kExitUsage;
  }

  auto parse_seed = [](const std::string& text) -> std::uint64_t {
    if (text.empty()) return env_seed().value_or(0);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw UsageError("--seed must be an unsigned integer, got '" + text + "'");
    }
    return v;
  };

  try {
    struct Dispatch {
      CLI::App* sub;
      Overrides* ov;
      const char* name;
    };
    for (const Dispatch& d : {Dispatch{train, &train_ov, "train"},
                              Dispatch{forecast, &forecast_ov, "forecast"},
                              Dispatch{evaluate_cmd, &eval_ov, "evaluate"},
                              Dispatch{baseline, &base_ov, "baseline"},
                              Dispatch{plot, &plot_ov, "plot"}}) {
      if (!d.sub->parsed()) continue;
      const RunConfig cfg = resolve_config(*d.sub, *d.ov);
      if (d.ov->dump) {
        out << dump_config(cfg);
        return kExitOk;
      }
      log_run(err, d.name, cfg);
      const std::string name = d.name;
      if (name == "train") return cmd_train(cfg, out, err);
      if (name == "forecast") return cmd_forecast(cfg, forecast_model, forecast_at, forecast_out, out);
      if (name == "evaluate") return cmd_evaluate(cfg, eval_model, eval_report, out, err);
      if (name == "baseline") {
        return cmd_baseline(cfg, base_method, base_order, base_report, out, err);
      }
      return cmd_plot(cfg, plot_model, plot_stations, plot_out, out, err);
    }
    if (gradcheck->parsed()) {
      const std::uint64_t seed = parse_seed(gc_seed);
      err << "dlstf gradcheck: seed=" << seed << '\n';
      return cmd_gradcheck(seed, gc_layers, gc_hidden, gc_n, gc_steps, gc_eps, out);
    }
    if (synth->parsed()) {
      sc.seed = parse_seed(synth_seed);
      err << "dlstf synth: seed=" << sc.seed << '\n';
      return cmd_synth(sc, synth_out, out);
    }
  } catch (const NumericalError& e) {
    err << "dlstf: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const UsageError& e) {
    err << "dlstf: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "dlstf: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const BankFormatError& e) {
    err << "dlstf: bank file error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "dlstf: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "dlstf: error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dlstf
