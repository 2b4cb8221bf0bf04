#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "rbmcda/linalg.hpp"

namespace rbmcda {

/// Mean and covariance of a Gaussian state estimate.
struct GaussianMoments {
  Vec mean;
  Mat cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// One linear-Gaussian transition + measurement model:
///   x_k = A x_{k-1} + q,  q ~ N(0, Q)
///   y_k = H x_k + r,      r ~ N(0, R)
struct LinearGaussianStep {
  Mat transition;
  Mat process_noise;
  Mat obs_matrix;
  Mat obs_noise;
};

/// Thrown when a matrix that must be positive definite fails Cholesky.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, Mat matrix)
      : std::runtime_error(what), matrix_(std::move(matrix)) {}

  const Mat& matrix() const { return matrix_; }

 private:
  Mat matrix_;
};

struct KalmanCallCounter {
  std::uint64_t predicts = 0;
  std::uint64_t updates = 0;

  std::uint64_t total() const { return predicts + updates; }

  KalmanCallCounter& operator+=(const KalmanCallCounter& o) {
    predicts += o.predicts;
    updates += o.updates;
    return *this;
  }
  KalmanCallCounter& operator-=(const KalmanCallCounter& o) {
    predicts -= o.predicts;
    updates -= o.updates;
    return *this;
  }
  friend KalmanCallCounter operator+(KalmanCallCounter a, const KalmanCallCounter& b) { return a += b; }
  friend KalmanCallCounter operator-(KalmanCallCounter a, const KalmanCallCounter& b) { return a -= b; }
  friend bool operator==(const KalmanCallCounter&, const KalmanCallCounter&) = default;
};

/// Kalman calls issued so far by the calling thread. Work done inside the
/// library's parallel regions is credited back to the thread that opened
/// the region, so a single-threaded caller sees every call it caused.
KalmanCallCounter kalman_calls();

void reset_kalman_calls();

namespace detail {
KalmanCallCounter& thread_kalman_counter();
}  // namespace detail

struct UpdateResult {
  GaussianMoments posterior;
  double log_likelihood;
};

/// Prediction step: (A m, A P A^T + Q).
GaussianMoments kf_predict(const GaussianMoments& state, const Mat& transition, const Mat& process_noise);

/// Update step. Returns the posterior moments and log N(y; H m, H P H^T + R).
/// Throws SingularMatrixError if the innovation covariance is not positive definite.
UpdateResult kf_update(const GaussianMoments& prior, const Vec& y, const Mat& obs_matrix, const Mat& obs_noise);

/// log N(x; mean, cov). Throws SingularMatrixError for a non-PD covariance.
double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& cov);

/// P <- (P + P^T) / 2
void symmetrize(Mat& m);

}  // namespace rbmcda
