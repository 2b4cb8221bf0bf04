#pragma once

#include <Eigen/Dense>

namespace rbmcda {

// Upper bound on state / measurement dimension. Vectors and matrices below are
// dynamically sized but stack allocated, which keeps the per-particle Kalman
// work free of heap traffic.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

}  // namespace rbmcda
