#include "rbmcda/gauss_kalman.hpp"

#include <cmath>
#include <numbers>

namespace rbmcda {

namespace {

thread_local KalmanCallCounter g_counter;

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

namespace detail {
KalmanCallCounter& thread_kalman_counter() { return g_counter; }
}  // namespace detail

KalmanCallCounter kalman_calls() { return g_counter; }

void reset_kalman_calls() { g_counter = {}; }

void symmetrize(Mat& m) {
  Mat t = m.transpose();
  m = 0.5 * (m + t);
}

GaussianMoments kf_predict(const GaussianMoments& state, const Mat& transition, const Mat& process_noise) {
  const auto n = state.mean.size();
  check(state.cov.rows() == n && state.cov.cols() == n, "kf_predict: covariance does not match mean");
  check(transition.rows() == n && transition.cols() == n, "kf_predict: transition matrix has wrong shape");
  check(process_noise.rows() == n && process_noise.cols() == n, "kf_predict: process noise has wrong shape");

  GaussianMoments out;
  out.mean = transition * state.mean;
  out.cov = transition * state.cov * transition.transpose() + process_noise;
  symmetrize(out.cov);
  ++g_counter.predicts;
  return out;
}

UpdateResult kf_update(const GaussianMoments& prior, const Vec& y, const Mat& obs_matrix, const Mat& obs_noise) {
  const auto n = prior.mean.size();
  const auto m = y.size();
  check(prior.cov.rows() == n && prior.cov.cols() == n, "kf_update: covariance does not match mean");
  check(obs_matrix.rows() == m && obs_matrix.cols() == n, "kf_update: measurement matrix has wrong shape");
  check(obs_noise.rows() == m && obs_noise.cols() == m, "kf_update: measurement noise has wrong shape");

  const Vec innovation = y - obs_matrix * prior.mean;
  const Mat ph = prior.cov * obs_matrix.transpose();
  Mat s = obs_matrix * ph + obs_noise;
  symmetrize(s);

  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("kf_update: innovation covariance is not positive definite", s);
  }

  // K = P H^T S^{-1}, computed as (S^{-1} H P)^T since S is symmetric.
  const Mat gain = llt.solve(ph.transpose()).transpose();
  const Vec whitened = llt.matrixL().solve(innovation);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

  UpdateResult out;
  out.posterior.mean = prior.mean + gain * innovation;
  out.posterior.cov = prior.cov - gain * s * gain.transpose();
  symmetrize(out.posterior.cov);
  out.log_likelihood =
      -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det + whitened.squaredNorm());
  ++g_counter.updates;
  return out;
}

double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& cov) {
  const auto n = x.size();
  check(mean.size() == n && cov.rows() == n && cov.cols() == n, "gaussian_logpdf: dimension mismatch");
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("gaussian_logpdf: covariance is not positive definite", cov);
  }
  const Vec z = llt.matrixL().solve(Vec(x - mean));
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

}  // namespace rbmcda
