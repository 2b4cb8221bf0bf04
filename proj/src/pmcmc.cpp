#include "rbmcda/pmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace rbmcda {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd active_part(const ParamVec& v, const std::array<bool, kNumParams>& active) {
  Eigen::VectorXd out(std::count(active.begin(), active.end(), true));
  int d = 0;
  for (int i = 0; i < kNumParams; ++i) {
    if (active[i]) out(d++) = v(i);
  }
  return out;
}

Eigen::MatrixXd cov_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Positive semidefinite fallback (e.g. an exactly zero covariance).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

int draw_index(std::span<const double> log_scores, double u) {
  double m = kNegInf;
  for (const double s : log_scores) m = std::max(m, s);
  if (m == kNegInf) return -1;
  double total = 0.0;
  for (const double s : log_scores) total += std::exp(s - m);
  double cum = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < log_scores.size(); ++i) {
    const double w = std::exp(log_scores[i] - m) / total;
    if (w > 0.0) last = static_cast<int>(i);
    cum += w;
    if (u < cum && w > 0.0) return static_cast<int>(i);
  }
  return last;
}

std::vector<WeightedHistory> summarize(const ParticleSet& set, bool keep_histories) {
  std::vector<WeightedHistory> out;
  out.reserve(set.size());
  for (const auto& p : set.particles) {
    WeightedHistory w;
    w.weight = std::exp(p.log_weight);
    w.num_targets = p.summary.T_seen;
    if (keep_histories) w.history = p.history;
    out.push_back(std::move(w));
  }
  return out;
}

ProposalState proposal_for(const SamplerConfig& cfg, const PriorSpec& spec) {
  const ParamVec sd = cfg.initial_proposal_sd.value_or(ParamVec(0.1 * spec.modes));
  return make_proposal(active_part(sd, cfg.sample_mask), cfg.adapt_start, cfg.resolved_adapt_end(), cfg.jitter,
                       cfg.sample_mask);
}

std::vector<int> refresh_indices(const SamplerConfig& cfg, int M, Rng& rng) {
  const int count = cfg.refresh_count < 0 ? (M + 9) / 10 : cfg.refresh_count;
  std::vector<int> out;
  if (M == 0) return out;
  std::uniform_int_distribution<int> pick(0, M - 1);
  for (int i = 0; i < count; ++i) out.push_back(pick(rng));
  return out;
}

}  // namespace

ParamVec to_coords(const ModelParams& p) { return ParamVec(std::sqrt(p.q), p.lambda, p.sigma); }

ModelParams from_coords(const ParamVec& v) { return ModelParams{v(0) * v(0), v(1), v(2)}; }

double prior_logpdf(const ParamVec& x, const PriorSpec& spec) {
  double lp = 0.0;
  const double k = spec.shape;
  for (int i = 0; i < kNumParams; ++i) {
    if (!(x(i) > 0.0)) return kNegInf;
    const double scale = spec.modes(i) / (k - 1.0);
    lp += (k - 1.0) * std::log(x(i)) - x(i) / scale - std::lgamma(k) - k * std::log(scale);
  }
  return lp;
}

double prior_logpdf(const ModelParams& theta, const PriorSpec& spec) {
  if (!(theta.q > 0.0 && theta.lambda > 0.0 && theta.sigma > 0.0)) return kNegInf;
  return prior_logpdf(to_coords(theta), spec);
}

Eigen::MatrixXd ProposalState::sample_cov() const {
  if (count < 2) return Eigen::MatrixXd::Zero(dim(), dim());
  return scatter / static_cast<double>(count - 1);
}

ProposalState make_proposal(const Eigen::VectorXd& initial_sd, int adapt_start, int adapt_end, double jitter,
                            std::array<bool, kNumParams> active) {
  ProposalState ps;
  const int d = static_cast<int>(initial_sd.size());
  ps.cov = initial_sd.array().square().matrix().asDiagonal();
  ps.mean = Eigen::VectorXd::Zero(d);
  ps.scatter = Eigen::MatrixXd::Zero(d, d);
  ps.adapt_start = adapt_start;
  ps.adapt_end = adapt_end;
  ps.jitter = jitter;
  ps.active = active;
  return ps;
}

ParamVec propose(const ParamVec& theta, const ProposalState& ps, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(ps.dim());
  for (int i = 0; i < ps.dim(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd step = cov_factor(ps.cov) * z;
  ParamVec out = theta;
  int d = 0;
  for (int i = 0; i < kNumParams; ++i) {
    if (ps.active[i]) out(i) += step(d++);
  }
  return out;
}

double proposal_logpdf(const ParamVec& from, const ParamVec& to, const ProposalState& ps) {
  const Eigen::VectorXd diff = active_part(to, ps.active) - active_part(from, ps.active);
  Eigen::LLT<Eigen::MatrixXd> llt(ps.cov);
  const Eigen::VectorXd z = llt.matrixL().solve(diff);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (ps.dim() * std::log(2.0 * M_PI) + log_det + z.squaredNorm());
}

void adapt(ProposalState& ps, const ParamVec& theta, int iteration) {
  const Eigen::VectorXd x = active_part(theta, ps.active);
  ++ps.count;
  const Eigen::VectorXd delta = x - ps.mean;
  ps.mean += delta / static_cast<double>(ps.count);
  ps.scatter += delta * (x - ps.mean).transpose();
  if (iteration >= ps.adapt_start && iteration <= ps.adapt_end && ps.count >= 2) {
    const double d = ps.dim();
    const double scale = (2.4 / d) * (2.4 / d);
    ps.cov = scale * ps.sample_cov() + ps.jitter * Eigen::MatrixXd::Identity(ps.dim(), ps.dim());
  }
}

void SamplerConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("sampler.iterations must be at least 1");
  if (n_particles < 1) throw std::invalid_argument("sampler.n_particles must be at least 1");
  if (!(jitter >= 0.0)) throw std::invalid_argument("sampler.jitter must be nonnegative");
  if (std::none_of(sample_mask.begin(), sample_mask.end(), [](bool b) { return b; }) && !fix_parameters) {
    throw std::invalid_argument("sampler.sample_mask must enable at least one parameter");
  }
  if (initial_proposal_sd && (initial_proposal_sd->array() < 0.0).any()) {
    throw std::invalid_argument("sampler.initial_proposal_sd must be nonnegative");
  }
}

Trace pmmh(const FilterContext& ctx, const ModelParams& theta0, const SamplerConfig& cfg, const PriorSpec& spec,
           Rng& rng) {
  cfg.validate();
  if (!(prior_logpdf(theta0, spec) > kNegInf)) throw std::invalid_argument("pmmh: initial parameters have zero prior");
  const auto calls_start = kalman_calls();
  Trace trace;
  trace.algorithm = Algorithm::pmmh;
  trace.initial_theta = theta0;

  ProposalState ps = proposal_for(cfg, spec);
  ParamVec theta = to_coords(theta0);
  double log_prior = prior_logpdf(theta, spec);
  ParticleSet current = rbmcda_filter(ctx, theta0, cfg.n_particles, rng);
  double loglik = current.log_marginal_lik + cfg.loglik_offset;

  std::vector<double> u(static_cast<std::size_t>(cfg.iterations) + 1, 0.0);
  trace.particle_sets.push_back(summarize(current, cfg.store_histories));
  trace.set_thetas.push_back(theta0);
  int last_accept = 0;
  adapt(ps, theta, 0);

  for (int i = 1; i <= cfg.iterations; ++i) {
    trace.proposal_covs.push_back(ps.cov);
    const ParamVec proposal = cfg.fix_parameters ? theta : propose(theta, ps, rng);
    const double log_prior_star = prior_logpdf(proposal, spec);
    double loglik_star = kNegInf;
    std::optional<ParticleSet> candidate;
    if (log_prior_star > kNegInf) {
      try {
        candidate = rbmcda_filter(ctx, from_coords(proposal), cfg.n_particles, rng);
        loglik_star = candidate->log_marginal_lik + cfg.loglik_offset;
      } catch (const DegenerateFilterError&) {
        ++trace.degenerate_proposals;
      }
    }
    const double log_ratio = loglik_star + log_prior_star - loglik - log_prior;
    const double alpha = loglik_star == kNegInf ? 0.0 : std::min(1.0, std::exp(log_ratio));
    u[static_cast<std::size_t>(i)] = alpha;
    u[static_cast<std::size_t>(last_accept)] += 1.0 - alpha;
    trace.particle_sets.push_back(candidate ? summarize(*candidate, cfg.store_histories)
                                            : std::vector<WeightedHistory>{});
    trace.set_thetas.push_back(from_coords(proposal));

    const bool accept = uniform01(rng) < alpha;
    if (accept) {
      theta = proposal;
      log_prior = log_prior_star;
      loglik = loglik_star;
      current = std::move(*candidate);
      last_accept = i;
    }
    adapt(ps, theta, i);

    TraceRow row;
    row.iteration = i;
    row.theta = from_coords(theta);
    row.accepted = accept;
    row.loglik = loglik - cfg.loglik_offset;
    row.num_targets = current.particles[static_cast<std::size_t>(draw_particle(current, rng))].summary.T_seen;
    row.kalman_calls = (kalman_calls() - calls_start).total();
    trace.rows.push_back(row);
  }
  trace.initial_u = u[0];
  for (int i = 1; i <= cfg.iterations; ++i) trace.rows[static_cast<std::size_t>(i - 1)].u = u[static_cast<std::size_t>(i)];
  return trace;
}

AssocHistory refresh_associations(const FilterContext& ctx, const ModelParams& theta, const AssocHistory& history,
                                  std::span<const int> indices, Rng& rng) {
  validate_history(ctx, history);
  const ThetaModel model = bind_params(ctx, theta);
  const auto times = ctx.scenario->times();
  const bool clutter = ctx.cfg.assoc.clutter_prob > 0.0;
  const int M = ctx.size();

  std::map<std::vector<int>, double> cache;
  auto block_loglik = [&](const std::vector<int>& block) {
    auto it = cache.find(block);
    if (it != cache.end()) return it->second;
    const double v = target_loglik(ctx, model, block);
    cache.emplace(block, v);
    return v;
  };
  auto history_loglik = [&](const AssocHistory& c) {
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(num_targets(c)));
    double ll = 0.0;
    for (int k = 0; k < M; ++k) {
      const Assoc a = c[static_cast<std::size_t>(k)];
      if (a == kClutter) {
        ll += clutter_loglik(ctx.obs(k).y, ctx.cfg.assoc);
      } else {
        blocks[static_cast<std::size_t>(a - 1)].push_back(k);
      }
    }
    for (const auto& b : blocks) ll += block_loglik(b);
    return ll;
  };

  AssocHistory c = history;
  for (const int k : indices) {
    if (k < 0 || k >= M) throw std::invalid_argument("refresh_associations: index out of range");
    // Labels used by other measurements.
    std::vector<bool> used(static_cast<std::size_t>(num_targets(c)) + 1, false);
    for (int m = 0; m < M; ++m) {
      if (m != k) used[static_cast<std::size_t>(c[static_cast<std::size_t>(m)])] = true;
    }
    std::vector<AssocHistory> candidates;
    if (clutter) {
      AssocHistory h = c;
      h[static_cast<std::size_t>(k)] = kClutter;
      candidates.push_back(canonicalize(h));
    }
    for (std::size_t label = 1; label < used.size(); ++label) {
      if (!used[label]) continue;
      AssocHistory h = c;
      h[static_cast<std::size_t>(k)] = static_cast<Assoc>(label);
      candidates.push_back(canonicalize(h));
    }
    {
      AssocHistory h = c;
      h[static_cast<std::size_t>(k)] = static_cast<Assoc>(used.size());
      candidates.push_back(canonicalize(h));
    }

    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& h : candidates) {
      const double lp = history_log_prior(h, times, ctx.cfg.assoc, *ctx.prior);
      scores.push_back(lp == kNegInf ? kNegInf : lp + history_loglik(h));
    }
    const int pick = draw_index(scores, uniform01(rng));
    if (pick < 0) throw std::logic_error("refresh_associations: no candidate has positive probability");
    c = candidates[static_cast<std::size_t>(pick)];
  }
  return c;
}

Trace pgibbs(const FilterContext& ctx, const ModelParams& theta0, const SamplerConfig& cfg, const PriorSpec& spec,
             Rng& rng) {
  cfg.validate();
  if (!(prior_logpdf(theta0, spec) > kNegInf)) throw std::invalid_argument("pgibbs: initial parameters have zero prior");
  const auto calls_start = kalman_calls();
  Trace trace;
  trace.algorithm = Algorithm::pgibbs;
  trace.initial_theta = theta0;
  if (cfg.n_particles == 1) {
    trace.warnings.push_back("pgibbs with one particle: associations can never change");
  }

  ProposalState ps = proposal_for(cfg, spec);
  ParamVec theta = to_coords(theta0);
  double log_prior = prior_logpdf(theta, spec);

  AssocHistory retained;
  {
    const ParticleSet init = rbmcda_filter(ctx, theta0, cfg.n_particles, rng);
    retained = init.particles[static_cast<std::size_t>(draw_particle(init, rng))].history;
  }
  double loglik = assoc_loglik(ctx, theta0, retained) + cfg.loglik_offset;
  adapt(ps, theta, 0);

  for (int i = 1; i <= cfg.iterations; ++i) {
    trace.proposal_covs.push_back(ps.cov);
    bool accepted = false;
    if (!cfg.fix_parameters) {
      const ParamVec proposal = propose(theta, ps, rng);
      const double log_prior_star = prior_logpdf(proposal, spec);
      double loglik_star = kNegInf;
      if (log_prior_star > kNegInf) loglik_star = assoc_loglik(ctx, from_coords(proposal), retained) + cfg.loglik_offset;
      const double log_ratio = loglik_star + log_prior_star - loglik - log_prior;
      const double z = uniform01(rng);
      if (loglik_star > kNegInf && std::log(z) < log_ratio) {
        theta = proposal;
        log_prior = log_prior_star;
        loglik = loglik_star;
        accepted = true;
      }
    }

    const ModelParams params = from_coords(theta);
    const ParticleSet set = conditional_rbmcda(ctx, params, cfg.n_particles, retained, rng);
    const auto& chosen = set.particles[static_cast<std::size_t>(draw_particle(set, rng))];
    retained = chosen.history;
    loglik = chosen.cond_loglik + cfg.loglik_offset;

    const auto idx = refresh_indices(cfg, ctx.size(), rng);
    if (!idx.empty()) {
      AssocHistory refreshed = refresh_associations(ctx, params, retained, idx, rng);
      if (refreshed != retained) {
        retained = std::move(refreshed);
        loglik = assoc_loglik(ctx, params, retained) + cfg.loglik_offset;
      }
    }
    adapt(ps, theta, i);

    TraceRow row;
    row.iteration = i;
    row.theta = params;
    row.accepted = accepted;
    row.loglik = loglik - cfg.loglik_offset;
    row.num_targets = num_targets(retained);
    row.kalman_calls = (kalman_calls() - calls_start).total();
    trace.rows.push_back(row);
    if (cfg.store_histories) trace.histories.push_back(retained);
  }
  return trace;
}

Trace run_sampler(const FilterContext& ctx, const ModelParams& theta0, const SamplerConfig& cfg,
                  const PriorSpec& spec, Rng& rng) {
  return cfg.algorithm == Algorithm::pmmh ? pmmh(ctx, theta0, cfg, spec, rng) : pgibbs(ctx, theta0, cfg, spec, rng);
}

}  // namespace rbmcda
