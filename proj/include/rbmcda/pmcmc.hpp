#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbmcda/rbmcda.hpp"

namespace rbmcda {

inline constexpr int kNumParams = 3;

/// Sampling coordinates (sqrt(q), lambda, sigma). The random walk, the
/// priors and the reported traces all live in these coordinates.
using ParamVec = Eigen::Vector3d;

ParamVec to_coords(const ModelParams& p);
ModelParams from_coords(const ParamVec& v);

/// Independent Gamma(shape, scale = mode / (shape - 1)) priors on each
/// coordinate. With the fixed shape of 2 the scale equals the mode.
struct PriorSpec {
  ParamVec modes{15.0, 1.0 / 3.0, 0.75};
  double shape = 2.0;
};

/// Sum of Gamma log-densities over the coordinates; -inf for a nonpositive one.
double prior_logpdf(const ModelParams& theta, const PriorSpec& spec);
double prior_logpdf(const ParamVec& coords, const PriorSpec& spec);

/// Adaptive Gaussian random-walk proposal over the active coordinates.
struct ProposalState {
  Eigen::MatrixXd cov;     // proposal covariance, d x d
  Eigen::VectorXd mean;    // running sample mean
  Eigen::MatrixXd scatter; // running sum of centered outer products
  long count = 0;
  int adapt_start = 100;
  int adapt_end = 0;
  double jitter = 1e-10;
  std::array<bool, kNumParams> active{true, true, true};

  int dim() const { return static_cast<int>(cov.rows()); }
  Eigen::MatrixXd sample_cov() const;
};

ProposalState make_proposal(const Eigen::VectorXd& initial_sd, int adapt_start, int adapt_end, double jitter = 1e-10,
                            std::array<bool, kNumParams> active = {true, true, true});

/// theta + L z on the active coordinates, L L^T = cov.
ParamVec propose(const ParamVec& theta, const ProposalState& ps, Rng& rng);

/// Log density of the random-walk proposal from -> to (symmetric).
double proposal_logpdf(const ParamVec& from, const ParamVec& to, const ProposalState& ps);

/// Adds theta to the running moments; inside [adapt_start, adapt_end] replaces
/// cov with (2.4/d)^2 * sample_cov + jitter * I.
void adapt(ProposalState& ps, const ParamVec& theta, int iteration);

enum class Algorithm { pmmh, pgibbs };

struct SamplerConfig {
  Algorithm algorithm = Algorithm::pgibbs;
  int iterations = 1000;
  int n_particles = 5;
  int adapt_start = 100;
  int adapt_end = -1;  // -1: iterations / 2
  double jitter = 1e-10;
  // Initial proposal standard deviations; empty: 0.1 * prior mode.
  std::optional<ParamVec> initial_proposal_sd;
  // Skip the parameter move (conditional filter still runs).
  bool fix_parameters = false;
  std::array<bool, kNumParams> sample_mask{true, true, true};
  // Association refresh moves per PGibbs iteration; -1: ceil(M / 10), 0: off.
  int refresh_count = -1;
  bool store_histories = true;
  // Added to every log-likelihood in acceptance ratios (invariance checks).
  double loglik_offset = 0.0;

  void validate() const;
  int resolved_adapt_end() const { return adapt_end < 0 ? iterations / 2 : adapt_end; }
};

struct WeightedHistory {
  double weight = 0.0;
  int num_targets = 0;
  AssocHistory history;
};

struct TraceRow {
  int iteration = 0;
  ModelParams theta;
  bool accepted = false;
  double loglik = 0.0;  // log p_hat(y | theta) (PMMH) or log p(y | theta, c) (PGibbs)
  double u = 1.0;       // PMMH occupancy weight of this iteration's particle set
  int num_targets = 0;
  std::uint64_t kalman_calls = 0;  // cumulative since chain start
};

struct Trace {
  Algorithm algorithm = Algorithm::pgibbs;
  ModelParams initial_theta;
  double initial_u = 0.0;  // occupancy weight of the initial PMMH particle set
  std::vector<TraceRow> rows;
  // PGibbs: retained history per iteration.
  std::vector<AssocHistory> histories;
  // PMMH: particle set per iteration, index 0 is the initial run.
  std::vector<std::vector<WeightedHistory>> particle_sets;
  // PMMH: parameters each stored particle set was filtered with.
  std::vector<ModelParams> set_thetas;
  std::vector<Eigen::MatrixXd> proposal_covs;  // covariance used at each iteration
  int degenerate_proposals = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return rows.size(); }
};

Trace pmmh(const FilterContext& ctx, const ModelParams& theta0, const SamplerConfig& cfg, const PriorSpec& spec,
           Rng& rng);

Trace pgibbs(const FilterContext& ctx, const ModelParams& theta0, const SamplerConfig& cfg, const PriorSpec& spec,
             Rng& rng);

Trace run_sampler(const FilterContext& ctx, const ModelParams& theta0, const SamplerConfig& cfg,
                  const PriorSpec& spec, Rng& rng);

/// Gibbs updates of c_k for each k in `indices`, in order, from
/// p(c_k | c_{-k}, theta, y). Candidates: clutter (if enabled), every target
/// observed elsewhere, and a fresh target; the result is relabeled canonically.
AssocHistory refresh_associations(const FilterContext& ctx, const ModelParams& theta, const AssocHistory& history,
                                  std::span<const int> indices, Rng& rng);

}  // namespace rbmcda
