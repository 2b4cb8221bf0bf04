#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rbmcda/linalg.hpp"
#include "rbmcda/pmcmc.hpp"

namespace rbmcda {

/// Discrete distribution on integers, support sorted ascending.
struct WeightedIntDist {
  std::vector<int> support;
  std::vector<double> weights;

  double prob(int value) const;
  double cdf(int value) const;
  bool empty() const { return support.empty(); }
};

/// Normalized histogram of (value, weight) pairs; zero-weight values dropped.
WeightedIntDist make_dist(std::span<const int> values, std::span<const double> weights = {});

using PointSet2D = std::vector<Vec2>;

/// Number-of-targets distribution. PGibbs: one unit-weight sample per
/// retained history. PMMH: every stored particle weighted by w * u.
/// `from_iteration` skips rows before that 1-based iteration (warmup).
WeightedIntDist num_targets_dist(const Trace& trace, int from_iteration = 1, int to_iteration = -1);
WeightedIntDist num_targets_dist(std::span<const Trace> traces, int from_iteration = 1, int to_iteration = -1);
WeightedIntDist num_targets_dist(const ParticleSet& set, bool alive_only = false);

/// sup_x |F1(x) - F2(x)|.
double kolmogorov(const WeightedIntDist& a, const WeightedIntDist& b);

/// Kolmogorov distance between a weighted sample and a continuous CDF.
double kolmogorov(std::span<const double> samples, std::span<const double> weights,
                  const std::function<double(double)>& cdf);

/// OSPA distance with cutoff c and order p; optimal assignment via Hungarian.
double ospa(const PointSet2D& x, const PointSet2D& y, double c = 10.0, double p = 1.0);

/// Minimum-cost assignment of rows to distinct columns (rows <= cols).
/// Returns the column for every row.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

/// Split-chain potential scale reduction factor for one scalar quantity.
double psrf(const std::vector<std::vector<double>>& chains);

/// Per-parameter PSRF over the second half of every trace (sqrt q, lambda, sigma).
std::array<double, kNumParams> psrf(std::span<const Trace> traces, bool discard_first_half = true);

/// 1 / sum w^2 for normalized weights.
double ess(std::span<const double> weights);

struct CurvePoint {
  std::uint64_t kalman_calls = 0;
  double kolmogorov = 1.0;
  int samples = 0;
  bool clipped = false;
};

/// At each cut (in per-chain Kalman calls): truncate every chain to rows with
/// stamp <= cut, drop the first half of each as warmup, pool, and measure
/// the Kolmogorov distance of the number-of-targets distribution to `reference`.
/// A cut with no retained samples has distance 1.
std::vector<CurvePoint> convergence_curve(std::span<const Trace> chains, const WeightedIntDist& reference,
                                          std::span<const std::uint64_t> cuts);

/// Weighted mean OSPA of per-sample final target locations against truth.
double mean_ospa(const FilterContext& ctx, const Trace& trace, std::span<const Vec2> truth, double c, double p,
                 int from_iteration = 1, int thin = 1);

}  // namespace rbmcda
