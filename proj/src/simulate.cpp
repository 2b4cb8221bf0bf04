#include "rbmcda/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rbmcda {

void ScenarioConfig::validate() const {
  if (n_targets < 1) throw std::invalid_argument("n_targets must be at least 1");
  if (n_obs < n_targets) throw std::invalid_argument("n_obs must be at least n_targets");
  if (!(t_max > t_min)) throw std::invalid_argument("time span must be nonempty");
  if (!(window.area() > 0.0)) throw std::invalid_argument("window must be nonempty");
  if (!truth.valid()) throw std::invalid_argument("model parameters must be positive");
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be positive");
}

Scenario simulate_scenario(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> ux(cfg.window.x_min, cfg.window.x_max);
  std::uniform_real_distribution<double> uy(cfg.window.y_min, cfg.window.y_max);
  std::uniform_real_distribution<double> ut(cfg.t_min, cfg.t_max);
  std::uniform_int_distribution<int> pick(0, cfg.n_targets - 1);

  const int n = cfg.n_targets;
  const int m = cfg.n_obs;
  const double steady_sd = std::sqrt(ou_stationary_variance(cfg.truth));

  std::vector<Eigen::Vector4d> state(n);
  for (int j = 0; j < n; ++j) {
    const double mx = ux(rng);
    const double my = uy(rng);
    state[j] << mx, my, mx + steady_sd * normal(rng), my + steady_sd * normal(rng);
  }

  std::vector<double> times(m);
  for (auto& t : times) t = ut(rng);
  std::stable_sort(times.begin(), times.end());

  std::vector<int> raw(m);
  long attempts = 0;
  for (;;) {
    if (attempts++ >= cfg.max_attempts) {
      throw GenerationFailedError("simulate_scenario: no surjective association within the attempt limit");
    }
    std::vector<bool> hit(n, false);
    int distinct = 0;
    for (auto& a : raw) {
      a = pick(rng);
      if (!hit[a]) {
        hit[a] = true;
        ++distinct;
      }
    }
    if (distinct == n) break;
  }

  // Canonical labels: raw target index -> order of first appearance.
  std::vector<int> label(n, 0);
  int next = 1;
  for (const int a : raw) {
    if (label[a] == 0) label[a] = next++;
  }

  Scenario s;
  s.observations.resize(m);
  s.truth_assoc = AssocHistory(m);
  s.truth_states = std::vector<std::vector<Eigen::Vector4d>>(n, std::vector<Eigen::Vector4d>(m));

  double t_prev = cfg.t_min;
  for (int k = 0; k < m; ++k) {
    const double dt = times[k] - t_prev;
    const double b = std::exp(-cfg.truth.lambda * dt);
    const double sd = std::sqrt(cfg.truth.q / (2.0 * cfg.truth.lambda) * (-std::expm1(-2.0 * cfg.truth.lambda * dt)));
    for (int j = 0; j < n; ++j) {
      for (int d = 0; d < 2; ++d) {
        state[j](2 + d) = (1.0 - b) * state[j](d) + b * state[j](2 + d) + sd * normal(rng);
      }
      (*s.truth_states)[label[j] - 1][k] = state[j];
    }
    const int a = raw[k];
    s.observations[k].t = times[k];
    const double e1 = normal(rng);
    const double e2 = normal(rng);
    s.observations[k].y = state[a].tail<2>() + cfg.truth.sigma * Vec2(e1, e2);
    (*s.truth_assoc)[k] = label[a];
    t_prev = times[k];
  }
  return s;
}

Scenario simulate_scenario(const ScenarioConfig& cfg) {
  Rng rng(cfg.seed);
  return simulate_scenario(cfg, rng);
}

}  // namespace rbmcda
