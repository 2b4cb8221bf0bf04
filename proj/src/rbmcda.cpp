#include "rbmcda/rbmcda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "rbmcda/parallel.hpp"

namespace rbmcda {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (const double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (const double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

Vec as_vec(const Vec2& y) {
  Vec v(2);
  v << y(0), y(1);
  return v;
}

double step_dt(const FilterContext& ctx, int k) { return k == 0 ? 0.0 : ctx.obs(k).t - ctx.obs(k - 1).t; }

// Work shared by all particles of one group: predicted targets + importance table.
struct GroupWork {
  std::vector<GaussianMoments> predicted;
  ImportanceTable table;
};

}  // namespace

void FilterConfig::validate() const {
  assoc.validate();
  if (!(ess_threshold >= 0.0 && ess_threshold <= 1.0)) throw std::invalid_argument("ess_threshold must be in [0, 1]");
  if (parallel_min_groups < 1) throw std::invalid_argument("parallel_min_groups must be positive");
}

FilterContext make_context(const Scenario& scenario, const FilterConfig& cfg) {
  cfg.validate();
  for (std::size_t k = 1; k < scenario.size(); ++k) {
    if (scenario.observations[k].t < scenario.observations[k - 1].t) {
      throw std::invalid_argument("make_context: observations must be in nondecreasing time order");
    }
  }
  FilterContext ctx;
  ctx.scenario = &scenario;
  ctx.cfg = cfg;
  if (cfg.birth_stats) {
    ctx.birth_stats = *cfg.birth_stats;
  } else if (scenario.size() >= 2) {
    const auto pts = scenario.points();
    ctx.birth_stats = observation_stats(pts);
  } else if (scenario.size() == 1) {
    ctx.birth_stats.mean = scenario.observations[0].y;
    ctx.birth_stats.count = 1;
  }
  ctx.prior = make_new_target_model(cfg.assoc, static_cast<int>(scenario.size()));
  return ctx;
}

ThetaModel bind_params(const FilterContext& ctx, const ModelParams& params) {
  if (!params.valid()) throw std::invalid_argument("bind_params: parameters must be positive");
  return ThetaModel{params, ou_measurement(params),
                    ou_birth_density(params, ctx.birth_stats, ctx.cfg.birth_block_diagonal)};
}

std::vector<double> ParticleSet::weights() const {
  std::vector<double> w;
  w.reserve(particles.size());
  for (const auto& p : particles) w.push_back(std::exp(p.log_weight));
  return w;
}

ParticleSet initial_particle_set(int n_particles, int M) {
  if (n_particles < 1) throw std::invalid_argument("number of particles must be at least 1");
  ParticleSet set;
  Particle p;
  p.summary.M = M;
  p.log_weight = -std::log(static_cast<double>(n_particles));
  p.history.reserve(static_cast<std::size_t>(M));
  set.particles.assign(static_cast<std::size_t>(n_particles), p);
  return set;
}

const Candidate* ImportanceTable::find(Assoc c) const {
  for (const auto& cand : candidates) {
    if (cand.assoc == c) return &cand;
  }
  return nullptr;
}

ImportanceTable eval_importance(const Particle& p, const Vec2& y, const FilterContext& ctx, const ThetaModel& model,
                                const UpdateResult* birth_update) {
  const auto& s = p.summary;
  const auto prior = assoc_prior(s, ctx.cfg.assoc, *ctx.prior);
  const Vec yv = as_vec(y);

  ImportanceTable table;
  table.candidates.reserve(static_cast<std::size_t>(s.T_seen) + 2);
  if (ctx.cfg.assoc.clutter_prob > 0.0) {
    Candidate c;
    c.assoc = kClutter;
    c.loglik = clutter_loglik(y, ctx.cfg.assoc);
    c.log_pi = std::log(prior[0]) + c.loglik;
    table.candidates.push_back(std::move(c));
  }
  for (int j = 0; j < s.T_seen; ++j) {
    if (!s.visible[j]) continue;
    auto upd = kf_update(p.targets[j], yv, model.meas.obs_matrix, model.meas.obs_noise);
    Candidate c;
    c.assoc = j + 1;
    c.posterior = std::move(upd.posterior);
    c.loglik = upd.log_likelihood;
    c.log_pi = std::log(prior[j + 1]) + c.loglik;
    table.candidates.push_back(std::move(c));
  }
  {
    Candidate c;
    c.assoc = s.T_seen + 1;
    if (birth_update) {
      c.posterior = birth_update->posterior;
      c.loglik = birth_update->log_likelihood;
    } else {
      auto upd = kf_update(model.birth, yv, model.meas.obs_matrix, model.meas.obs_noise);
      c.posterior = std::move(upd.posterior);
      c.loglik = upd.log_likelihood;
    }
    c.log_pi = std::log(prior.back()) + c.loglik;
    table.candidates.push_back(std::move(c));
  }
  std::vector<double> lp;
  lp.reserve(table.candidates.size());
  for (const auto& c : table.candidates) lp.push_back(c.log_pi);
  table.log_norm = log_sum_exp(lp);
  return table;
}

std::vector<int> systematic_indices(std::span<const double> weights, int count, double u) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  if (count <= 0) return out;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const int n = static_cast<int>(weights.size());
  double cum = weights.empty() ? 0.0 : weights[0] / total;
  int j = 0;
  for (int i = 0; i < count; ++i) {
    const double point = (u + i) / count;
    while (point >= cum && j < n - 1) {
      ++j;
      cum += weights[j] / total;
    }
    out.push_back(j);
  }
  return out;
}

void resample(ParticleSet& set, ResampleMode mode, double u) {
  const int n = static_cast<int>(set.size());
  const auto w = set.weights();
  std::vector<int> idx;
  if (mode == ResampleMode::keep_first) {
    idx.push_back(0);
    const auto rest = systematic_indices(w, n - 1, u);
    idx.insert(idx.end(), rest.begin(), rest.end());
  } else {
    idx = systematic_indices(w, n, u);
  }
  std::vector<Particle> out;
  out.reserve(static_cast<std::size_t>(n));
  for (const int i : idx) out.push_back(set.particles[static_cast<std::size_t>(i)]);
  const double lw = -std::log(static_cast<double>(n));
  for (auto& p : out) p.log_weight = lw;
  set.particles = std::move(out);
}

void resample(ParticleSet& set, ResampleMode mode, Rng& rng) { resample(set, mode, uniform01(rng)); }

void rbmcda_step_with_draws(ParticleSet& set, int k, const FilterContext& ctx, const ThetaModel& model,
                            std::span<const double> draws, double resample_u, const AssocHistory* clamp) {
  const int n = static_cast<int>(set.size());
  if (static_cast<int>(draws.size()) != n) throw std::invalid_argument("rbmcda_step: one draw per particle required");
  const auto& ob = ctx.obs(k);
  const Vec yv = as_vec(ob.y);
  const auto kf_before = kalman_calls();
  const bool share = ctx.cfg.share_computation;

  // Group representatives.
  std::vector<int> group_of(static_cast<std::size_t>(n));
  std::vector<int> reps;
  if (share) {
    std::map<int, int> index;
    for (int i = 0; i < n; ++i) {
      auto [it, inserted] = index.try_emplace(set.particles[i].group, static_cast<int>(reps.size()));
      if (inserted) reps.push_back(i);
      group_of[i] = it->second;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      group_of[i] = i;
      reps.push_back(i);
    }
  }

  const TransitionModel trans = ou_discretize(model.params, step_dt(ctx, k));
  std::optional<UpdateResult> birth;
  if (share) birth = kf_update(model.birth, yv, model.meas.obs_matrix, model.meas.obs_noise);

  const int n_groups = static_cast<int>(reps.size());
  std::vector<GroupWork> work(static_cast<std::size_t>(n_groups));
  const bool parallel =
      ctx.cfg.execution == ExecutionMode::parallel && n_groups >= ctx.cfg.parallel_min_groups;
  parallel_for(n_groups, parallel, [&](int g) {
    const Particle& p = set.particles[static_cast<std::size_t>(reps[g])];
    GroupWork& w = work[static_cast<std::size_t>(g)];
    w.predicted = p.targets;
    if (k > 0) {
      for (int j = 0; j < p.summary.T_seen; ++j) {
        if (p.summary.visible[j]) w.predicted[j] = kf_predict(p.targets[j], trans.transition, trans.process_noise);
      }
    }
    Particle predicted_view;
    predicted_view.summary = p.summary;
    predicted_view.targets = w.predicted;
    w.table = eval_importance(predicted_view, ob.y, ctx, model, birth ? &*birth : nullptr);
  });

  // Draw associations and build the new particles.
  std::vector<double> log_v(static_cast<std::size_t>(n));
  std::vector<Assoc> chosen(static_cast<std::size_t>(n));
  parallel_for(n, ctx.cfg.execution == ExecutionMode::parallel && n >= ctx.cfg.parallel_min_groups, [&](int i) {
    Particle& p = set.particles[static_cast<std::size_t>(i)];
    const GroupWork& w = work[static_cast<std::size_t>(group_of[i])];
    const auto& cands = w.table.candidates;

    const Candidate* pick = nullptr;
    Assoc c = kClutter;
    if (clamp && i == 0) {
      c = (*clamp)[static_cast<std::size_t>(k)];
      pick = w.table.find(c);
    } else if (w.table.log_norm != kNegInf) {
      const double u = draws[static_cast<std::size_t>(i)];
      double cum = 0.0;
      for (const auto& cand : cands) {
        cum += std::exp(cand.log_pi - w.table.log_norm);
        pick = &cand;
        if (u < cum) break;
      }
      // Skip zero-probability tail entries picked up by rounding.
      while (pick != nullptr && pick->log_pi == kNegInf && pick != &cands.front()) --pick;
      c = pick->assoc;
    } else {
      pick = &cands.back();
      c = pick->assoc;
    }

    // Targets of a group share predictions; only the chosen one is updated.
    p.targets = w.predicted;
    if (pick != nullptr && c != kClutter) {
      if (c == p.summary.T_seen + 1) {
        p.targets.push_back(pick->posterior);
      } else {
        p.targets[static_cast<std::size_t>(c - 1)] = pick->posterior;
      }
    }
    p.history.push_back(c);
    record_association(p.summary, c, ob.t);
    apply_deaths_in_place(p.summary, ob.t, ctx.cfg.assoc);

    const double lh = pick ? pick->loglik : kNegInf;
    const double norm = (clamp && i == 0 && pick == nullptr) ? kNegInf : w.table.log_norm;
    p.cond_loglik += lh;
    log_v[static_cast<std::size_t>(i)] = p.log_weight + norm;
    chosen[static_cast<std::size_t>(i)] = c;
  });

  // Regroup: same old group + same association => identical state.
  {
    std::map<std::pair<int, Assoc>, int> ids;
    for (int i = 0; i < n; ++i) {
      const std::pair<int, Assoc> key{share ? group_of[i] : i, chosen[static_cast<std::size_t>(i)]};
      auto [it, inserted] = ids.try_emplace(key, static_cast<int>(ids.size()));
      set.particles[static_cast<std::size_t>(i)].group = it->second;
    }
  }

  const double log_p_inc = log_sum_exp(log_v);
  if (log_p_inc == kNegInf || std::isnan(log_p_inc)) {
    throw DegenerateFilterError("rbmcda: every particle has zero weight at measurement " + std::to_string(k + 1), k);
  }
  set.log_marginal_lik += log_p_inc;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    auto& p = set.particles[static_cast<std::size_t>(i)];
    p.log_weight = log_v[static_cast<std::size_t>(i)] - log_p_inc;
    const double w = std::exp(p.log_weight);
    sum_sq += w * w;
  }

  StepDiagnostics diag;
  diag.ess = 1.0 / sum_sq;
  diag.log_incremental_lik = log_p_inc;
  if (diag.ess < ctx.cfg.ess_threshold * n) {
    resample(set, clamp ? ResampleMode::keep_first : ResampleMode::unconditional, resample_u);
    diag.resampled = true;
  }
  set.steps.push_back(diag);
  set.kalman_calls += kalman_calls() - kf_before;
}

void rbmcda_step(ParticleSet& set, int k, const FilterContext& ctx, const ThetaModel& model, Rng& rng,
                 const AssocHistory* clamp) {
  const std::uint64_t key = rng();
  const double resample_u = uniform01(rng);
  std::vector<double> draws(set.size());
  for (std::size_t i = 0; i < draws.size(); ++i) draws[i] = stream_uniform(key, i);
  rbmcda_step_with_draws(set, k, ctx, model, draws, resample_u, clamp);
}

ParticleSet rbmcda_filter(const FilterContext& ctx, const ModelParams& params, int n_particles, Rng& rng) {
  const ThetaModel model = bind_params(ctx, params);
  ParticleSet set = initial_particle_set(n_particles, ctx.size());
  for (int k = 0; k < ctx.size(); ++k) rbmcda_step(set, k, ctx, model, rng);
  return set;
}

void validate_history(const FilterContext& ctx, std::span<const Assoc> history) {
  if (static_cast<int>(history.size()) != ctx.size()) {
    throw std::invalid_argument("association history length does not match the number of measurements");
  }
  if (!is_canonical(history)) throw std::invalid_argument("association history is not canonical");
}

ParticleSet conditional_rbmcda(const FilterContext& ctx, const ModelParams& params, int n_particles,
                               const AssocHistory& clamped, Rng& rng) {
  validate_history(ctx, clamped);
  const ThetaModel model = bind_params(ctx, params);
  ParticleSet set = initial_particle_set(n_particles, ctx.size());
  for (int k = 0; k < ctx.size(); ++k) rbmcda_step(set, k, ctx, model, rng, &clamped);
  return set;
}

int draw_particle(const ParticleSet& set, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double w = std::exp(set.particles[i].log_weight);
    if (w > 0.0) last_positive = static_cast<int>(i);
    cum += w;
    if (u < cum && w > 0.0) return static_cast<int>(i);
  }
  return last_positive;
}

namespace {

// One Kalman pass along a history. Calls on_target(j, moments) for every
// target after the last measurement when `final_moments` is set.
double history_pass(const FilterContext& ctx, const ThetaModel& model, std::span<const Assoc> history,
                    std::vector<GaussianMoments>* final_moments) {
  validate_history(ctx, history);
  std::vector<GaussianMoments> targets;
  double ll = 0.0;
  for (int k = 0; k < ctx.size(); ++k) {
    const auto& ob = ctx.obs(k);
    if (k > 0 && !targets.empty()) {
      const TransitionModel trans = ou_discretize(model.params, ob.t - ctx.obs(k - 1).t);
      for (auto& g : targets) g = kf_predict(g, trans.transition, trans.process_noise);
    }
    const Assoc c = history[static_cast<std::size_t>(k)];
    if (c == kClutter) {
      ll += clutter_loglik(ob.y, ctx.cfg.assoc);
      continue;
    }
    if (c == static_cast<Assoc>(targets.size()) + 1) targets.push_back(model.birth);
    auto upd = kf_update(targets[static_cast<std::size_t>(c - 1)], as_vec(ob.y), model.meas.obs_matrix,
                         model.meas.obs_noise);
    targets[static_cast<std::size_t>(c - 1)] = std::move(upd.posterior);
    ll += upd.log_likelihood;
  }
  if (final_moments) *final_moments = std::move(targets);
  return ll;
}

}  // namespace

double assoc_loglik(const FilterContext& ctx, const ModelParams& params, std::span<const Assoc> history) {
  return history_pass(ctx, bind_params(ctx, params), history, nullptr);
}

double target_loglik(const FilterContext& ctx, const ThetaModel& model, std::span<const int> indices) {
  if (indices.empty()) return 0.0;
  GaussianMoments g = model.birth;
  double ll = 0.0;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto& ob = ctx.obs(indices[n]);
    if (n > 0) {
      const TransitionModel trans = ou_discretize(model.params, ob.t - ctx.obs(indices[n - 1]).t);
      g = kf_predict(g, trans.transition, trans.process_noise);
    }
    auto upd = kf_update(g, as_vec(ob.y), model.meas.obs_matrix, model.meas.obs_noise);
    g = std::move(upd.posterior);
    ll += upd.log_likelihood;
  }
  return ll;
}

std::vector<Vec2> final_target_locations(const FilterContext& ctx, const ModelParams& params,
                                         std::span<const Assoc> history) {
  std::vector<GaussianMoments> moments;
  history_pass(ctx, bind_params(ctx, params), history, &moments);
  std::vector<Vec2> out;
  out.reserve(moments.size());
  for (const auto& g : moments) out.emplace_back(g.mean(2), g.mean(3));
  return out;
}

}  // namespace rbmcda
