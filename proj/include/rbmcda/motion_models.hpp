#pragma once

#include <span>

#include "rbmcda/gauss_kalman.hpp"
#include "rbmcda/linalg.hpp"

namespace rbmcda {

/// Static parameters of the 2-D Ornstein-Uhlenbeck target model.
struct ModelParams {
  double q = 100.0;     // diffusion intensity (position^2 / time)
  double lambda = 0.5;  // mean-reversion rate (1 / time)
  double sigma = 0.5;   // measurement noise std (position)

  bool valid() const { return q > 0.0 && lambda > 0.0 && sigma > 0.0; }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Sample mean / covariance of a set of 2-D observations.
struct ObservationStats {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
  int count = 0;
};

/// Unbiased (n-1) sample moments. Requires at least two points.
ObservationStats observation_stats(std::span<const Vec2> points);

struct TransitionModel {
  Mat transition;
  Mat process_noise;
};

struct MeasurementModel {
  Mat obs_matrix;
  Mat obs_noise;
};

/// Exact discretization of the OU model over dt. State layout is
/// [mu1, mu2, p1, p2]: constant mean location followed by the location.
TransitionModel ou_discretize(const ModelParams& params, double dt);

/// H picks out [p1, p2]; R = sigma^2 I.
MeasurementModel ou_measurement(const ModelParams& params);

/// Stationary location variance q / (2 lambda).
double ou_stationary_variance(const ModelParams& params);

/// Density of a newly born target. The mean-location block uses the empirical
/// observation moments, the location block adds the stationary OU spread.
/// With block_diagonal set the cross-covariance between the blocks is zero.
GaussianMoments ou_birth_density(const ModelParams& params, const ObservationStats& stats,
                                 bool block_diagonal = false);

}  // namespace rbmcda
