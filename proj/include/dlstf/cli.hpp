#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlstf/horizon.hpp"
#include "dlstf/pipeline.hpp"

namespace dlstf {

/// Bad command line or config file; maps to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Everything a run depends on. Serialized as flat `key = value` text.
struct RunConfig {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t h = 6;
  std::size_t ell = 12;
  std::vector<std::vector<std::size_t>> widths;  // empty = defaults for h
  TrainConfig train;
  SplitOptions split;
  std::size_t max_gap = 3;
  ActivationKind gate_activation = ActivationKind::Sigmoid;
  ActivationKind head_activation = ActivationKind::Identity;

  HorizonConfig horizon(std::size_t n) const;
};

/// Applies `key = value` lines on top of `cfg`. Blank lines and `#` comments are ignored.
void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& source);
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text form; parsing it back and dumping again gives the same bytes.
std::string dump_config(const RunConfig& cfg);

/// "32;64,64" -> {{32}, {64, 64}}
std::vector<std::vector<std::size_t>> parse_widths(const std::string& text);
std::string format_widths(const std::vector<std::vector<std::size_t>>& widths);

/// Entry point of the `dlstf` tool. Output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dlstf
