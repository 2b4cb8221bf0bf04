#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rbmcda/linalg.hpp"

namespace rbmcda {

/// Association value: 0 is clutter, j >= 1 is target j (canonical labels).
using Assoc = int;
using AssocHistory = std::vector<Assoc>;

inline constexpr Assoc kClutter = 0;

struct AssocHistorySummary {
  int k = 1;       // 1-based index of the measurement about to be associated
  int M = 1;       // total number of measurements
  int T_seen = 0;  // distinct targets so far
  std::vector<bool> visible;       // size T_seen
  std::vector<double> last_seen;   // size T_seen

  int num_visible() const;
};

struct Window {
  double x_min = 0.0, x_max = 100.0;
  double y_min = 0.0, y_max = 100.0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool contains(const Vec2& p) const {
    return p(0) >= x_min && p(0) <= x_max && p(1) >= y_min && p(1) <= y_max;
  }
  friend bool operator==(const Window&, const Window&) = default;
};

enum class NewTargetPriorKind { latent_count, fixed };
enum class ClutterDensityKind { uniform_window, constant };

struct AssocPriorConfig {
  double clutter_prob = 0.0;
  ClutterDensityKind clutter_kind = ClutterDensityKind::uniform_window;
  double clutter_density = 0.0;  // used by ClutterDensityKind::constant
  Window window;
  std::optional<double> death_threshold;  // disabled when empty

  NewTargetPriorKind new_target_kind = NewTargetPriorKind::latent_count;
  double fixed_new_prob = 0.1;  // NewTargetPriorKind::fixed
  int latent_count_max = 0;     // support {1..latent_count_max}; 0 means M

  void validate() const;
};

/// Source of P(new target | k, M, T_seen) before the clutter split.
class NewTargetModel {
 public:
  virtual ~NewTargetModel() = default;
  virtual double new_target_probability(int k, int M, int T_seen) const = 0;
};

/// Latent target count N ~ Uniform{1..N_max}, each association uniform over
/// the N targets. Returns the posterior probability that measurement k opens
/// a new target given the canonical history of the first k-1 measurements.
class LatentCountModel final : public NewTargetModel {
 public:
  /// n_max = 0 uses the M passed at query time. Rows are cached for queries
  /// with k <= max_k.
  explicit LatentCountModel(int n_max, int max_k = 0);

  double new_target_probability(int k, int M, int T_seen) const override;

  /// Uncached evaluation.
  static double compute(int k, int n_max, int T_seen);

 private:
  int n_max_;
  int cached_k_;
  std::vector<std::vector<double>> table_;  // table_[k][T]
};

class FixedNewTargetModel final : public NewTargetModel {
 public:
  explicit FixedNewTargetModel(double p) : p_(p) {}
  double new_target_probability(int, int, int) const override { return p_; }

 private:
  double p_;
};

std::unique_ptr<NewTargetModel> make_new_target_model(const AssocPriorConfig& cfg, int M);

/// Prior over {0, 1..T_seen, T_seen+1}. Entry 0 is clutter, entry T_seen+1 is
/// a new target. Invisible targets get zero.
std::vector<double> assoc_prior(const AssocHistorySummary& summary, const AssocPriorConfig& cfg,
                                const NewTargetModel& model);
std::vector<double> assoc_prior(const AssocHistorySummary& summary, const AssocPriorConfig& cfg);

double clutter_loglik(const Vec2& y, const AssocPriorConfig& cfg);

/// Marks visible targets unobserved for longer than the threshold as dead.
AssocHistorySummary apply_deaths(AssocHistorySummary summary, double now, const AssocPriorConfig& cfg);
void apply_deaths_in_place(AssocHistorySummary& summary, double now, const AssocPriorConfig& cfg);

/// Records association c (made at time t) into the summary and advances k.
void record_association(AssocHistorySummary& summary, Assoc c, double t);

/// Labels appear in order of first appearance and only as clutter, an
/// earlier label, or the next unused label.
bool is_canonical(std::span<const Assoc> history);

/// Relabels non-clutter entries by order of first appearance.
AssocHistory canonicalize(std::span<const Assoc> history);

/// Number of distinct targets in a canonical history.
int num_targets(std::span<const Assoc> history);

/// log p(c_{1:T}) under the sequential prior, deaths included. times[k] is
/// the timestamp of measurement k.
double history_log_prior(std::span<const Assoc> history, std::span<const double> times,
                         const AssocPriorConfig& cfg, const NewTargetModel& model);

}  // namespace rbmcda
