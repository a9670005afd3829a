#include <charconv>
#include <istream>
#include <sstream>

#include "dlstf/cli.hpp"
#include "dlstf/format.hpp"

namespace dlstf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return v;
}

std::optional<Timestamp> parse_optional_time(const std::string& key, const std::string& value) {
  if (value.empty() || value == "none") return std::nullopt;
  try {
    return parse_timestamp(value);
  } catch (const DataError& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

std::string format_optional_time(const std::optional<Timestamp>& t) {
  return t ? format_timestamp(*t) : "none";
}

}  // namespace

std::vector<std::vector<std::size_t>> parse_widths(const std::string& text) {
  std::vector<std::vector<std::size_t>> widths;
  if (text.empty() || text == "default") return widths;
  std::stringstream models(text);
  std::string model;
  while (std::getline(models, model, ';')) {
    std::vector<std::size_t> layers;
    std::stringstream layer_stream(model);
    std::string layer;
    while (std::getline(layer_stream, layer, ',')) {
      const auto units = parse_number<std::size_t>("widths", trim(layer));
      if (units == 0) throw UsageError("config key 'widths': layer width must be positive");
      layers.push_back(units);
    }
    if (layers.empty()) throw UsageError("config key 'widths': empty model specification");
    widths.push_back(std::move(layers));
  }
  return widths;
}

std::string format_widths(const std::vector<std::vector<std::size_t>>& widths) {
  if (widths.empty()) return "default";
  std::string out;
  for (std::size_t m = 0; m < widths.size(); ++m) {
    if (m > 0) out += ';';
    for (std::size_t l = 0; l < widths[m].size(); ++l) {
      if (l > 0) out += ',';
      out += std::to_string(widths[m][l]);
    }
  }
  return out;
}

HorizonConfig RunConfig::horizon(std::size_t n) const {
  std::vector<std::vector<std::size_t>> resolved = widths;
  if (!resolved.empty()) {
    // A shorter list repeats its last entry for the remaining models.
    if (resolved.size() > h) {
      throw UsageError("widths lists " + std::to_string(resolved.size()) + " models but h = " +
                       std::to_string(h));
    }
    while (resolved.size() < h) resolved.push_back(resolved.back());
  }
  TrainConfig base = train;
  base.seed = seed;
  HorizonConfig cfg = make_horizon_config(n, h, ell, base, std::move(resolved));
  cfg.gate_activation = gate_activation;
  cfg.head_activation = head_activation;
  return cfg;
}

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "data") {
    cfg.data = value;
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "h") {
    cfg.h = parse_number<std::size_t>(key, value);
  } else if (key == "ell") {
    cfg.ell = parse_number<std::size_t>(key, value);
  } else if (key == "widths") {
    cfg.widths = parse_widths(value);
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = parse_number<double>(key, value);
  } else if (key == "rho") {
    cfg.train.rho = parse_number<double>(key, value);
  } else if (key == "epsilon") {
    cfg.train.epsilon = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "max_epochs") {
    cfg.train.max_epochs = parse_number<std::size_t>(key, value);
  } else if (key == "patience") {
    cfg.train.patience = parse_number<std::size_t>(key, value);
  } else if (key == "clip_norm") {
    cfg.train.clip_norm = parse_number<double>(key, value);
  } else if (key == "train_fraction") {
    cfg.split.train_fraction = parse_number<double>(key, value);
  } else if (key == "val_fraction") {
    cfg.split.val_fraction = parse_number<double>(key, value);
  } else if (key == "val_begin") {
    cfg.split.val_begin = parse_optional_time(key, value);
  } else if (key == "test_begin") {
    cfg.split.test_begin = parse_optional_time(key, value);
  } else if (key == "test_end") {
    cfg.split.test_end = parse_optional_time(key, value);
  } else if (key == "max_gap") {
    cfg.max_gap = parse_number<std::size_t>(key, value);
  } else if (key == "gate_activation" || key == "head_activation") {
    ActivationKind kind{};
    try {
      kind = activation_from_string(value);
    } catch (const std::invalid_argument& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
    (key == "gate_activation" ? cfg.gate_activation : cfg.head_activation) = kind;
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_value(cfg, key, value);
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  auto kv = [&out](const char* key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  kv("data", cfg.data);
  kv("out", cfg.out);
  kv("seed", std::to_string(cfg.seed));
  kv("h", std::to_string(cfg.h));
  kv("ell", std::to_string(cfg.ell));
  kv("widths", format_widths(cfg.widths));
  kv("learning_rate", format_double(cfg.train.learning_rate));
  kv("rho", format_double(cfg.train.rho));
  kv("epsilon", format_double(cfg.train.epsilon));
  kv("batch_size", std::to_string(cfg.train.batch_size));
  kv("max_epochs", std::to_string(cfg.train.max_epochs));
  kv("patience", std::to_string(cfg.train.patience));
  kv("clip_norm", format_double(cfg.train.clip_norm));
  kv("train_fraction", format_double(cfg.split.train_fraction));
  kv("val_fraction", format_double(cfg.split.val_fraction));
  kv("val_begin", format_optional_time(cfg.split.val_begin));
  kv("test_begin", format_optional_time(cfg.split.test_begin));
  kv("test_end", format_optional_time(cfg.split.test_end));
  kv("max_gap", std::to_string(cfg.max_gap));
  kv("gate_activation", to_string(cfg.gate_activation));
  kv("head_activation", to_string(cfg.head_activation));
  return out.str();
}

}  // namespace dlstf
