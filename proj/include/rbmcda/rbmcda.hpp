#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rbmcda/association.hpp"
#include "rbmcda/gauss_kalman.hpp"
#include "rbmcda/motion_models.hpp"
#include "rbmcda/random.hpp"
#include "rbmcda/scenario.hpp"

namespace rbmcda {

enum class ExecutionMode { serial, parallel };

struct FilterConfig {
  AssocPriorConfig assoc;
  double ess_threshold = 0.5;  // resample when ESS < ess_threshold * N
  bool birth_block_diagonal = false;
  // Particles with identical histories share one set of Kalman evaluations.
  bool share_computation = true;
  ExecutionMode execution = ExecutionMode::serial;
  // Below this many distinct histories a step stays serial even in parallel mode.
  int parallel_min_groups = 8;
  // Overrides the empirical birth moments computed from the scenario.
  std::optional<ObservationStats> birth_stats;

  void validate() const;
};

class DegenerateFilterError : public std::runtime_error {
 public:
  DegenerateFilterError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Parameter-independent pieces of the filtering problem for one scenario.
struct FilterContext {
  const Scenario* scenario = nullptr;
  FilterConfig cfg;
  ObservationStats birth_stats;
  std::shared_ptr<const NewTargetModel> prior;

  int size() const { return static_cast<int>(scenario->size()); }
  const Observation& obs(int k) const { return scenario->observations[static_cast<std::size_t>(k)]; }
};

FilterContext make_context(const Scenario& scenario, const FilterConfig& cfg);

/// Parameter-dependent measurement model and birth density.
struct ThetaModel {
  ModelParams params;
  MeasurementModel meas;
  GaussianMoments birth;
};

ThetaModel bind_params(const FilterContext& ctx, const ModelParams& params);

struct Particle {
  AssocHistory history;
  std::vector<GaussianMoments> targets;
  AssocHistorySummary summary;
  double log_weight = 0.0;
  // log p(y_{1:k} | theta, history) accumulated from the chosen candidates.
  double cond_loglik = 0.0;
  // Particles with the same group hold identical histories and moments.
  int group = 0;
};

struct StepDiagnostics {
  double ess = 0.0;
  bool resampled = false;
  double log_incremental_lik = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;
  double log_marginal_lik = 0.0;
  KalmanCallCounter kalman_calls;
  std::vector<StepDiagnostics> steps;

  std::size_t size() const { return particles.size(); }
  std::vector<double> weights() const;
};

ParticleSet initial_particle_set(int n_particles, int M);

struct Candidate {
  Assoc assoc = kClutter;
  GaussianMoments posterior;  // unset for clutter
  double loglik = 0.0;        // log p(y_k | candidate, past)
  double log_pi = 0.0;        // log prior + loglik
};

/// Unnormalized optimal importance distribution for one particle whose
/// visible targets are already predicted to the measurement time.
struct ImportanceTable {
  std::vector<Candidate> candidates;
  double log_norm = 0.0;  // logsumexp of log_pi

  const Candidate* find(Assoc c) const;
};

ImportanceTable eval_importance(const Particle& p, const Vec2& y, const FilterContext& ctx, const ThetaModel& model,
                                const UpdateResult* birth_update = nullptr);

/// Advances every particle over measurement k (0-based): predict, importance
/// sampling of c_k, weight update, deaths, ESS-triggered resampling.
/// With `clamp`, particle 0 follows the clamped history.
void rbmcda_step(ParticleSet& set, int k, const FilterContext& ctx, const ThetaModel& model, Rng& rng,
                 const AssocHistory* clamp = nullptr);

/// Same as rbmcda_step with explicit randomness: draws[i] drives the
/// association draw of slot i and resample_u the systematic resampling.
void rbmcda_step_with_draws(ParticleSet& set, int k, const FilterContext& ctx, const ThetaModel& model,
                            std::span<const double> draws, double resample_u, const AssocHistory* clamp = nullptr);

ParticleSet rbmcda_filter(const FilterContext& ctx, const ModelParams& params, int n_particles, Rng& rng);

/// Conditional filter: particle 0 is clamped to `clamped`, never replaced by
/// resampling. Every particle carries its exact conditional log-likelihood.
ParticleSet conditional_rbmcda(const FilterContext& ctx, const ModelParams& params, int n_particles,
                               const AssocHistory& clamped, Rng& rng);

enum class ResampleMode { unconditional, keep_first };

/// Systematic resampling; weights reset to uniform. keep_first keeps slot 0
/// and fills slots 1..N-1 systematically from the full weighted set.
void resample(ParticleSet& set, ResampleMode mode, double u);
void resample(ParticleSet& set, ResampleMode mode, Rng& rng);

/// Offspring indices produced by systematic resampling of `count` points.
std::vector<int> systematic_indices(std::span<const double> weights, int count, double u);

/// Draws a particle index from the normalized final weights.
int draw_particle(const ParticleSet& set, Rng& rng);

/// Exact log p(y_{1:T} | theta, c) by one Kalman pass along the history.
double assoc_loglik(const FilterContext& ctx, const ModelParams& params, std::span<const Assoc> history);

/// Exact log-likelihood of the measurements at `indices` (increasing) when
/// they all come from one target born at the first of them.
double target_loglik(const FilterContext& ctx, const ThetaModel& model, std::span<const int> indices);

/// Posterior mean locations of every target in the history at the time of
/// the last measurement.
std::vector<Vec2> final_target_locations(const FilterContext& ctx, const ModelParams& params,
                                         std::span<const Assoc> history);

/// Throws std::invalid_argument unless the history is canonical and has one
/// entry per measurement.
void validate_history(const FilterContext& ctx, std::span<const Assoc> history);

}  // namespace rbmcda
