#include "rbmcda/motion_models.hpp"

#include <cmath>
#include <stdexcept>

namespace rbmcda {

ObservationStats observation_stats(std::span<const Vec2> points) {
  if (points.size() < 2) throw std::invalid_argument("observation_stats: need at least two observations");
  ObservationStats s;
  s.count = static_cast<int>(points.size());
  for (const auto& p : points) s.mean += p;
  s.mean /= static_cast<double>(s.count);
  for (const auto& p : points) {
    const Vec2 d = p - s.mean;
    s.cov += d * d.transpose();
  }
  s.cov /= static_cast<double>(s.count - 1);
  return s;
}

TransitionModel ou_discretize(const ModelParams& params, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("ou_discretize: dt must be nonnegative");
  const double b = std::exp(-params.lambda * dt);
  const double a = -std::expm1(-params.lambda * dt);
  // q / (2 lambda) * (1 - exp(-2 lambda dt)), written to stay accurate as lambda -> 0
  const double s = params.q * dt * (-std::expm1(-2.0 * params.lambda * dt)) / (2.0 * params.lambda * dt);

  TransitionModel out;
  out.transition = Mat::Identity(4, 4);
  out.process_noise = Mat::Zero(4, 4);
  for (int d = 0; d < 2; ++d) {
    out.transition(2 + d, d) = a;
    out.transition(2 + d, 2 + d) = b;
    out.process_noise(2 + d, 2 + d) = dt > 0.0 ? s : 0.0;
  }
  return out;
}

MeasurementModel ou_measurement(const ModelParams& params) {
  MeasurementModel out;
  out.obs_matrix = Mat::Zero(2, 4);
  out.obs_matrix(0, 2) = 1.0;
  out.obs_matrix(1, 3) = 1.0;
  out.obs_noise = Mat::Identity(2, 2) * (params.sigma * params.sigma);
  return out;
}

double ou_stationary_variance(const ModelParams& params) { return params.q / (2.0 * params.lambda); }

GaussianMoments ou_birth_density(const ModelParams& params, const ObservationStats& stats, bool block_diagonal) {
  GaussianMoments g;
  g.mean.resize(4);
  g.mean << stats.mean(0), stats.mean(1), stats.mean(0), stats.mean(1);
  g.cov = Mat::Zero(4, 4);
  const Mat2 steady = Mat2::Identity() * ou_stationary_variance(params);
  g.cov.block<2, 2>(0, 0) = stats.cov;
  if (block_diagonal) {
    g.cov.block<2, 2>(2, 2) = steady;
  } else {
    g.cov.block<2, 2>(0, 2) = stats.cov;
    g.cov.block<2, 2>(2, 0) = stats.cov;
    g.cov.block<2, 2>(2, 2) = stats.cov + steady;
  }
  symmetrize(g.cov);
  return g;
}

}  // namespace rbmcda
