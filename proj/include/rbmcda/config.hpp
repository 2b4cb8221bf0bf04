#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rbmcda/pmcmc.hpp"
#include "rbmcda/simulate.hpp"

namespace rbmcda {

inline constexpr int kConfigFormatVersion = 1;

struct DiagnoseConfig {
  std::string runs;       // manifest of the chains to analyse
  std::string baseline;   // optional manifest of fixed-parameter chains
  std::string reference;  // optional manifest of long reference chains
  std::string scenario;   // optional scenario CSV (with truth_assoc)
  std::string truth_states;  // optional truth state CSV, enables OSPA
  double ospa_cutoff = 10.0;
  double ospa_order = 1.0;
  double warmup_fraction = 0.5;
  int ospa_thin = 1;
  int curve_points = 10;

  friend bool operator==(const DiagnoseConfig&, const DiagnoseConfig&) = default;
};

/// Everything a command needs. Parsed from JSON with unknown keys rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";

  ModelParams model;  // filter parameters and sampler starting point
  PriorSpec prior;

  int n_particles = 5;
  FilterConfig filter;
  std::optional<AssocHistory> forced_history;  // cmd_filter: clamp particle 0

  SamplerConfig sampler;
  int chains = 1;
  std::vector<std::uint64_t> chain_seeds;  // empty: derived from seed

  ScenarioConfig scenario;
  std::string scenario_path;  // input for filter / sample

  DiagnoseConfig diagnose;

  void validate() const;
  std::uint64_t chain_seed(int chain) const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
/// Throws std::invalid_argument on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

}  // namespace rbmcda
