#include "rbmcda/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace rbmcda {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Accumulator {
  std::map<int, double> mass;
  void add(int value, double w) {
    if (w > 0.0) mass[value] += w;
  }
  WeightedIntDist finish() const {
    WeightedIntDist d;
    double total = 0.0;
    for (const auto& [v, w] : mass) total += w;
    if (!(total > 0.0)) return d;
    for (const auto& [v, w] : mass) {
      d.support.push_back(v);
      d.weights.push_back(w / total);
    }
    return d;
  }
};

bool has_particle_sets(const Trace& trace) {
  return trace.algorithm == Algorithm::pmmh && trace.particle_sets.size() == trace.rows.size() + 1;
}

double set_u(const Trace& trace, std::size_t s) {
  return s == 0 ? trace.initial_u : trace.rows[s - 1].u;
}

void accumulate(const Trace& trace, int from_iteration, int to_iteration, Accumulator& acc) {
  const int last = static_cast<int>(trace.rows.size());
  const int to = to_iteration < 0 ? last : std::min(to_iteration, last);
  if (has_particle_sets(trace)) {
    // Set s was produced at iteration s; set 0 is the initial run.
    for (int s = std::max(0, from_iteration <= 1 ? 0 : from_iteration); s <= to; ++s) {
      const double u = set_u(trace, static_cast<std::size_t>(s));
      if (!(u > 0.0)) continue;
      for (const auto& p : trace.particle_sets[static_cast<std::size_t>(s)]) acc.add(p.num_targets, u * p.weight);
    }
    return;
  }
  for (int i = std::max(1, from_iteration); i <= to; ++i) acc.add(trace.rows[static_cast<std::size_t>(i - 1)].num_targets, 1.0);
}

}  // namespace

double WeightedIntDist::prob(int value) const {
  const auto it = std::lower_bound(support.begin(), support.end(), value);
  if (it == support.end() || *it != value) return 0.0;
  return weights[static_cast<std::size_t>(it - support.begin())];
}

double WeightedIntDist::cdf(int value) const {
  double c = 0.0;
  for (std::size_t i = 0; i < support.size() && support[i] <= value; ++i) c += weights[i];
  return std::min(c, 1.0);
}

WeightedIntDist make_dist(std::span<const int> values, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != values.size()) {
    throw std::invalid_argument("make_dist: values and weights differ in length");
  }
  Accumulator acc;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("make_dist: weights must be finite and nonnegative");
    acc.add(values[i], w);
  }
  return acc.finish();
}

WeightedIntDist num_targets_dist(const Trace& trace, int from_iteration, int to_iteration) {
  Accumulator acc;
  accumulate(trace, from_iteration, to_iteration, acc);
  return acc.finish();
}

WeightedIntDist num_targets_dist(std::span<const Trace> traces, int from_iteration, int to_iteration) {
  // Chains are pooled with equal total weight.
  Accumulator acc;
  for (const auto& t : traces) {
    const WeightedIntDist d = num_targets_dist(t, from_iteration, to_iteration);
    for (std::size_t i = 0; i < d.support.size(); ++i) acc.add(d.support[i], d.weights[i]);
  }
  return acc.finish();
}

WeightedIntDist num_targets_dist(const ParticleSet& set, bool alive_only) {
  Accumulator acc;
  for (const auto& p : set.particles) {
    acc.add(alive_only ? p.summary.num_visible() : p.summary.T_seen, std::exp(p.log_weight));
  }
  return acc.finish();
}

double kolmogorov(const WeightedIntDist& a, const WeightedIntDist& b) {
  std::size_t i = 0;
  std::size_t j = 0;
  double fa = 0.0;
  double fb = 0.0;
  double d = 0.0;
  while (i < a.support.size() || j < b.support.size()) {
    const int va = i < a.support.size() ? a.support[i] : std::numeric_limits<int>::max();
    const int vb = j < b.support.size() ? b.support[j] : std::numeric_limits<int>::max();
    const int v = std::min(va, vb);
    if (va == v) fa += a.weights[i++];
    if (vb == v) fb += b.weights[j++];
    d = std::max(d, std::abs(fa - fb));
  }
  if (a.empty() != b.empty()) d = 1.0;
  return std::min(d, 1.0);
}

double kolmogorov(std::span<const double> samples, std::span<const double> weights,
                  const std::function<double(double)>& cdf) {
  if (!weights.empty() && weights.size() != samples.size()) {
    throw std::invalid_argument("kolmogorov: samples and weights differ in length");
  }
  if (samples.empty()) return 1.0;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return samples[x] < samples[y]; });
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) total += weights.empty() ? 1.0 : weights[i];
  double below = 0.0;
  double d = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double x = samples[order[i]];
    double at = 0.0;
    while (i < order.size() && samples[order[i]] == x) {
      at += weights.empty() ? 1.0 : weights[order[i]];
      ++i;
    }
    const double f = cdf(x);
    d = std::max({d, std::abs(below / total - f), std::abs((below + at) / total - f)});
    below += at;
  }
  return d;
}

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const int m = static_cast<int>(cost[0].size());
  if (n > m) throw std::invalid_argument("solve_assignment: more rows than columns");
  // Shortest augmenting path with potentials, 1-based with a virtual column 0.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    if (static_cast<int>(cost[static_cast<std::size_t>(i - 1)].size()) != m) {
      throw std::invalid_argument("solve_assignment: ragged cost matrix");
    }
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<bool> used(static_cast<std::size_t>(m) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (match[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  }
  return row_to_col;
}

double ospa(const PointSet2D& x, const PointSet2D& y, double c, double p) {
  if (!(c > 0.0)) throw std::invalid_argument("ospa: cutoff must be positive");
  if (!(p >= 1.0)) throw std::invalid_argument("ospa: order must be at least 1");
  const PointSet2D& small = x.size() <= y.size() ? x : y;
  const PointSet2D& large = x.size() <= y.size() ? y : x;
  const std::size_t m = small.size();
  const std::size_t n = large.size();
  if (n == 0) return 0.0;
  if (m == 0) return c;
  std::vector<std::vector<double>> cost(m, std::vector<double>(n));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i][j] = std::pow(std::min((small[i] - large[j]).norm(), c), p);
  }
  const auto assign = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total += cost[i][static_cast<std::size_t>(assign[i])];
  total += static_cast<double>(n - m) * std::pow(c, p);
  return std::min(std::pow(total / static_cast<double>(n), 1.0 / p), c);
}

double psrf(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("psrf: at least two chains required");
  const std::size_t len = chains[0].size();
  if (len < 4) throw std::invalid_argument("psrf: chains must have length at least 4");
  for (const auto& c : chains) {
    if (c.size() != len) throw std::invalid_argument("psrf: chains must have equal length");
  }
  // Each chain contributes its first and last halves (the middle draw of an
  // odd-length chain is dropped).
  const std::size_t n = len / 2;
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& c : chains) {
    for (const std::size_t start : {std::size_t{0}, len - n}) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += c[start + i];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (c[start + i] - mean) * (c[start + i] - mean);
      means.push_back(mean);
      vars.push_back(ss / static_cast<double>(n - 1));
    }
  }
  const double m = static_cast<double>(means.size());
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double between = 0.0;
  for (const double mu : means) between += (mu - grand) * (mu - grand);
  between *= static_cast<double>(n) / (m - 1.0);
  const double within = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  if (within == 0.0) return between == 0.0 ? 1.0 : kInf;
  const double nd = static_cast<double>(n);
  const double var_plus = (nd - 1.0) / nd * within + between / nd;
  return std::sqrt(var_plus / within);
}

std::array<double, kNumParams> psrf(std::span<const Trace> traces, bool discard_first_half) {
  std::array<double, kNumParams> out{};
  for (int d = 0; d < kNumParams; ++d) {
    std::vector<std::vector<double>> chains;
    for (const auto& t : traces) {
      const std::size_t start = discard_first_half ? t.rows.size() / 2 : 0;
      std::vector<double> c;
      for (std::size_t i = start; i < t.rows.size(); ++i) c.push_back(to_coords(t.rows[i].theta)(d));
      chains.push_back(std::move(c));
    }
    out[static_cast<std::size_t>(d)] = psrf(chains);
  }
  return out;
}

double ess(std::span<const double> weights) {
  double s = 0.0;
  for (const double w : weights) s += w * w;
  return s > 0.0 ? 1.0 / s : 0.0;
}

std::vector<CurvePoint> convergence_curve(std::span<const Trace> chains, const WeightedIntDist& reference,
                                          std::span<const std::uint64_t> cuts) {
  std::vector<CurvePoint> out;
  for (const std::uint64_t cut : cuts) {
    CurvePoint pt;
    pt.kalman_calls = cut;
    Accumulator acc;
    for (const auto& t : chains) {
      int r = 0;
      while (r < static_cast<int>(t.rows.size()) && t.rows[static_cast<std::size_t>(r)].kalman_calls <= cut) ++r;
      if (r == static_cast<int>(t.rows.size()) && (t.rows.empty() || t.rows.back().kalman_calls < cut)) {
        pt.clipped = true;
      }
      const int from = r / 2 + 1;
      if (from > r) continue;
      pt.samples += r - from + 1;
      const WeightedIntDist d = num_targets_dist(t, from, r);
      for (std::size_t i = 0; i < d.support.size(); ++i) acc.add(d.support[i], d.weights[i]);
    }
    const WeightedIntDist pooled = acc.finish();
    pt.kolmogorov = pooled.empty() ? 1.0 : kolmogorov(pooled, reference);
    out.push_back(pt);
  }
  return out;
}

double mean_ospa(const FilterContext& ctx, const Trace& trace, std::span<const Vec2> truth, double c, double p,
                 int from_iteration, int thin) {
  if (thin < 1) throw std::invalid_argument("mean_ospa: thin must be positive");
  const PointSet2D truth_set(truth.begin(), truth.end());
  double total = 0.0;
  double weight = 0.0;
  const int last = static_cast<int>(trace.rows.size());
  if (has_particle_sets(trace)) {
    if (trace.set_thetas.size() != trace.particle_sets.size()) {
      throw std::invalid_argument("mean_ospa: trace lacks particle-set parameters");
    }
    for (int s = from_iteration <= 1 ? 0 : from_iteration; s <= last; s += thin) {
      const double u = set_u(trace, static_cast<std::size_t>(s));
      if (!(u > 0.0)) continue;
      for (const auto& wh : trace.particle_sets[static_cast<std::size_t>(s)]) {
        if (!(wh.weight > 0.0)) continue;
        if (wh.history.size() != static_cast<std::size_t>(ctx.size())) {
          throw std::invalid_argument("mean_ospa: particle histories were not stored");
        }
        const auto locs = final_target_locations(ctx, trace.set_thetas[static_cast<std::size_t>(s)], wh.history);
        total += u * wh.weight * ospa(PointSet2D(locs.begin(), locs.end()), truth_set, c, p);
        weight += u * wh.weight;
      }
    }
  } else {
    if (trace.histories.size() != trace.rows.size()) {
      throw std::invalid_argument("mean_ospa: trace lacks retained histories");
    }
    for (int i = std::max(1, from_iteration); i <= last; i += thin) {
      const auto& row = trace.rows[static_cast<std::size_t>(i - 1)];
      const auto locs = final_target_locations(ctx, row.theta, trace.histories[static_cast<std::size_t>(i - 1)]);
      total += ospa(PointSet2D(locs.begin(), locs.end()), truth_set, c, p);
      weight += 1.0;
    }
  }
  if (!(weight > 0.0)) throw std::invalid_argument("mean_ospa: no samples in range");
  return total / weight;
}

}  // namespace rbmcda
