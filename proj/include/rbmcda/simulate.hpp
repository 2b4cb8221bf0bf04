#pragma once

#include <cstdint>
#include <stdexcept>

#include "rbmcda/association.hpp"
#include "rbmcda/motion_models.hpp"
#include "rbmcda/random.hpp"
#include "rbmcda/scenario.hpp"

namespace rbmcda {

struct ScenarioConfig {
  int n_targets = 30;
  int n_obs = 150;
  Window window;
  double t_min = 0.0;
  double t_max = 1.0;
  ModelParams truth{100.0, 0.5, 0.5};
  std::uint64_t seed = 1;
  long max_attempts = 1'000'000;

  void validate() const;
};

class GenerationFailedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// OU trajectories with uniformly random mean locations, iid uniform
/// observation times, uniform associations rejection-sampled until every
/// target is observed, and Gaussian measurement noise.
Scenario simulate_scenario(const ScenarioConfig& cfg, Rng& rng);

/// Convenience overload seeding the generator from cfg.seed.
Scenario simulate_scenario(const ScenarioConfig& cfg);

}  // namespace rbmcda
