#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rbmcda/config.hpp"

namespace rbmcda {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumeric = 3, kExitIo = 4 };

/// Command-line overrides applied on top of the config file.
struct CliOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> chains;
  std::optional<int> threads;
  std::vector<std::string> inputs;  // positional: scenario CSV for filter / sample
  std::vector<std::string> argv;
};

/// Loads the config (defaults when no file is given) and applies overrides.
RunConfig resolve_config(const CliOptions& opts);

int cmd_simulate(const RunConfig& cfg, const CliOptions& opts, std::ostream& log);
int cmd_filter(const RunConfig& cfg, const CliOptions& opts, std::ostream& log);
int cmd_sample(const RunConfig& cfg, const CliOptions& opts, std::ostream& log);
int cmd_diagnose(const RunConfig& cfg, const CliOptions& opts, std::ostream& log);

/// Resolves the config, dispatches, and maps exceptions to exit codes.
int run_command(const std::string& command, const CliOptions& opts, std::ostream& log);

/// Pretty-printed default configuration.
std::string default_config_text();

/// Traces listed in a sample manifest (chains with status "ok" only).
struct LoadedRun {
  std::vector<Trace> traces;
  RunConfig config;
  std::string scenario_path;
  int failed_chains = 0;
};
LoadedRun load_run(const std::string& manifest_path);

}  // namespace rbmcda
