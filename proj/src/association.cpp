#include "rbmcda/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace rbmcda {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(n!) for n = 0..n_max
std::vector<double> log_factorials(int n_max) {
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int n = 2; n <= n_max; ++n) out[n] = out[n - 1] + std::log(static_cast<double>(n));
  return out;
}

double new_prob_from_table(int k, int n_max, int T, const std::vector<double>& lf) {
  if (T == 0) return 1.0;
  if (T > n_max) return 0.0;
  // L(N) = N! / (N-T)! / N^(k-1), new-target weight (N-T)/N
  double max_log = kNegInf;
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(n_max - T + 1));
  for (int N = T; N <= n_max; ++N) {
    const double l = lf[N] - lf[N - T] - (k - 1) * std::log(static_cast<double>(N));
    logs.push_back(l);
    max_log = std::max(max_log, l);
  }
  double num = 0.0, den = 0.0;
  for (int N = T; N <= n_max; ++N) {
    const double w = std::exp(logs[N - T] - max_log);
    den += w;
    num += w * static_cast<double>(N - T) / static_cast<double>(N);
  }
  return num / den;
}

}  // namespace

int AssocHistorySummary::num_visible() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

void AssocPriorConfig::validate() const {
  if (!(clutter_prob >= 0.0 && clutter_prob < 1.0)) throw std::invalid_argument("clutter_prob must be in [0, 1)");
  if (clutter_prob > 0.0 && clutter_kind == ClutterDensityKind::uniform_window && !(window.area() > 0.0)) {
    throw std::invalid_argument("clutter window must be nonempty");
  }
  if (clutter_kind == ClutterDensityKind::constant && !(clutter_density >= 0.0)) {
    throw std::invalid_argument("clutter_density must be nonnegative");
  }
  if (death_threshold && !(*death_threshold > 0.0)) throw std::invalid_argument("death_threshold must be positive");
  if (!(fixed_new_prob >= 0.0 && fixed_new_prob <= 1.0)) throw std::invalid_argument("fixed_new_prob must be in [0, 1]");
  if (latent_count_max < 0) throw std::invalid_argument("latent_count_max must be nonnegative");
}

LatentCountModel::LatentCountModel(int n_max, int max_k) : n_max_(n_max), cached_k_(n_max > 0 ? max_k : 0) {
  if (cached_k_ <= 0) return;
  const auto lf = log_factorials(n_max_);
  table_.resize(static_cast<std::size_t>(cached_k_) + 1);
  for (int k = 1; k <= cached_k_; ++k) {
    table_[k].resize(static_cast<std::size_t>(k));
    for (int T = 0; T < k; ++T) table_[k][T] = new_prob_from_table(k, n_max_, T, lf);
  }
}

double LatentCountModel::compute(int k, int n_max, int T_seen) {
  return new_prob_from_table(k, n_max, T_seen, log_factorials(n_max));
}

double LatentCountModel::new_target_probability(int k, int M, int T_seen) const {
  if (k <= cached_k_ && T_seen < k) return table_[k][T_seen];
  return compute(k, n_max_ > 0 ? n_max_ : M, T_seen);
}

std::unique_ptr<NewTargetModel> make_new_target_model(const AssocPriorConfig& cfg, int M) {
  if (cfg.new_target_kind == NewTargetPriorKind::fixed) return std::make_unique<FixedNewTargetModel>(cfg.fixed_new_prob);
  const int n_max = cfg.latent_count_max > 0 ? cfg.latent_count_max : std::max(M, 1);
  return std::make_unique<LatentCountModel>(n_max, M);
}

std::vector<double> assoc_prior(const AssocHistorySummary& s, const AssocPriorConfig& cfg,
                                const NewTargetModel& model) {
  std::vector<double> p(static_cast<std::size_t>(s.T_seen) + 2, 0.0);
  const double keep = 1.0 - cfg.clutter_prob;
  p[0] = cfg.clutter_prob;
  const int visible = s.num_visible();
  if (s.T_seen == 0 || visible == 0) {
    p.back() = keep;
    return p;
  }
  const double b = model.new_target_probability(s.k, s.M, s.T_seen);
  p.back() = keep * b;
  const double each = keep * (1.0 - b) / visible;
  for (int j = 0; j < s.T_seen; ++j) {
    if (s.visible[j]) p[j + 1] = each;
  }
  return p;
}

std::vector<double> assoc_prior(const AssocHistorySummary& summary, const AssocPriorConfig& cfg) {
  if (cfg.new_target_kind == NewTargetPriorKind::fixed) {
    return assoc_prior(summary, cfg, FixedNewTargetModel(cfg.fixed_new_prob));
  }
  const int n_max = cfg.latent_count_max > 0 ? cfg.latent_count_max : summary.M;
  return assoc_prior(summary, cfg, LatentCountModel(n_max));
}

double clutter_loglik(const Vec2& y, const AssocPriorConfig& cfg) {
  if (cfg.clutter_kind == ClutterDensityKind::constant) return std::log(cfg.clutter_density);
  if (!cfg.window.contains(y)) return kNegInf;
  return -std::log(cfg.window.area());
}

void apply_deaths_in_place(AssocHistorySummary& s, double now, const AssocPriorConfig& cfg) {
  if (!cfg.death_threshold) return;
  for (int j = 0; j < s.T_seen; ++j) {
    if (s.visible[j] && now - s.last_seen[j] > *cfg.death_threshold) s.visible[j] = false;
  }
}

AssocHistorySummary apply_deaths(AssocHistorySummary summary, double now, const AssocPriorConfig& cfg) {
  apply_deaths_in_place(summary, now, cfg);
  return summary;
}

void record_association(AssocHistorySummary& s, Assoc c, double t) {
  if (c == s.T_seen + 1) {
    ++s.T_seen;
    s.visible.push_back(true);
    s.last_seen.push_back(t);
  } else if (c >= 1 && c <= s.T_seen) {
    s.last_seen[c - 1] = t;
  }
  ++s.k;
}

bool is_canonical(std::span<const Assoc> history) {
  int max_label = 0;
  for (const Assoc c : history) {
    if (c < 0 || c > max_label + 1) return false;
    max_label = std::max(max_label, c);
  }
  return true;
}

AssocHistory canonicalize(std::span<const Assoc> history) {
  AssocHistory out;
  out.reserve(history.size());
  std::unordered_map<Assoc, Assoc> relabel;
  for (const Assoc c : history) {
    if (c == kClutter) {
      out.push_back(kClutter);
      continue;
    }
    auto [it, inserted] = relabel.try_emplace(c, static_cast<Assoc>(relabel.size() + 1));
    out.push_back(it->second);
  }
  return out;
}

int num_targets(std::span<const Assoc> history) {
  int m = 0;
  for (const Assoc c : history) m = std::max(m, c);
  return m;
}

double history_log_prior(std::span<const Assoc> history, std::span<const double> times,
                         const AssocPriorConfig& cfg, const NewTargetModel& model) {
  if (history.size() != times.size()) throw std::invalid_argument("history_log_prior: length mismatch");
  AssocHistorySummary s;
  s.M = static_cast<int>(history.size());
  double lp = 0.0;
  for (std::size_t k = 0; k < history.size(); ++k) {
    const Assoc c = history[k];
    if (c < 0 || c > s.T_seen + 1) return kNegInf;
    const auto prior = assoc_prior(s, cfg, model);
    const double pc = prior[static_cast<std::size_t>(c)];
    if (!(pc > 0.0)) return kNegInf;
    lp += std::log(pc);
    record_association(s, c, times[k]);
    apply_deaths_in_place(s, times[k], cfg);
  }
  return lp;
}

}  // namespace rbmcda
