#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rbmcda/gauss_kalman.hpp"
#include "rbmcda/motion_models.hpp"

using namespace rbmcda;

namespace {

Mat random_spd(int n, std::mt19937_64& rng, double jitter = 0.1) {
  std::normal_distribution<double> z;
  Mat B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = z(rng);
  Mat S = B * B.transpose();
  S += jitter * Mat::Identity(n, n);
  return S;
}

Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

GaussianMoments moments(Vec m, Mat P) { return GaussianMoments{std::move(m), std::move(P)}; }

}  // namespace

TEST(KfPredict, IdentityDynamicsLeavesMomentsUnchanged) {
  Vec m(2);
  m << 1, 2;
  const auto out = kf_predict(moments(m, Mat::Identity(2, 2)), Mat::Identity(2, 2), Mat::Zero(2, 2));
  EXPECT_EQ(out.mean, m);
  EXPECT_EQ(out.cov, Mat::Identity(2, 2));
}

TEST(KfPredict, ScalarArithmetic) {
  Vec m(1);
  m << 1;
  Mat P(1, 1), A(1, 1), Q(1, 1);
  P << 1;
  A << 2;
  Q << 1;
  const auto out = kf_predict(moments(m, P), A, Q);
  EXPECT_DOUBLE_EQ(out.mean(0), 2.0);
  EXPECT_DOUBLE_EQ(out.cov(0, 0), 5.0);
}

TEST(KfPredict, DimensionMismatchThrows) {
  Vec m(2);
  m << 1, 2;
  EXPECT_THROW(kf_predict(moments(m, Mat::Identity(2, 2)), Mat::Identity(3, 3), Mat::Zero(3, 3)),
               std::invalid_argument);
  EXPECT_THROW(kf_predict(moments(m, Mat::Identity(2, 2)), Mat::Identity(2, 2), Mat::Zero(3, 3)),
               std::invalid_argument);
}

TEST(KfPredict, MatchesMonteCarloTransitions) {
  std::mt19937_64 rng(7);
  const int n = 4;
  const Mat P = random_spd(n, rng);
  const Mat Q = random_spd(n, rng);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = 0.5 * random_vec(1, rng)(0);
  const Vec m = random_vec(n, rng);
  const auto pred = kf_predict(moments(m, P), A, Q);

  const Eigen::MatrixXd LP = Eigen::MatrixXd(P).llt().matrixL();
  const Eigen::MatrixXd LQ = Eigen::MatrixXd(Q).llt().matrixL();
  const int draws = 1'000'000;
  std::normal_distribution<double> z;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd e1(n), e2(n);
  for (int d = 0; d < draws; ++d) {
    for (int i = 0; i < n; ++i) e1(i) = z(rng);
    for (int i = 0; i < n; ++i) e2(i) = z(rng);
    const Eigen::VectorXd x = Eigen::MatrixXd(A) * (Eigen::VectorXd(m) + LP * e1) + LQ * e2;
    sum += x;
    sq += x * x.transpose();
  }
  const Eigen::VectorXd mean = sum / draws;
  const Eigen::MatrixXd cov = sq / draws - mean * mean.transpose();
  for (int i = 0; i < n; ++i) {
    const double se = std::sqrt(pred.cov(i, i) / draws);
    EXPECT_NEAR(mean(i), pred.mean(i), 3.0 * se) << i;
    for (int j = 0; j < n; ++j) {
      const double se_c = std::sqrt((pred.cov(i, i) * pred.cov(j, j) + pred.cov(i, j) * pred.cov(i, j)) / draws);
      EXPECT_NEAR(cov(i, j), pred.cov(i, j), 3.0 * se_c) << i << "," << j;
    }
  }
}

TEST(KfUpdate, ScalarArithmetic) {
  Vec m(1), y(1);
  m << 0;
  y << 2;
  Mat P(1, 1), H(1, 1), R(1, 1);
  P << 1;
  H << 1;
  R << 1;
  const auto r = kf_update(moments(m, P), y, H, R);
  EXPECT_DOUBLE_EQ(r.posterior.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(r.posterior.cov(0, 0), 0.5);
  const double expected = -0.5 * std::log(2.0 * std::numbers::pi * 2.0) - 0.5 * 4.0 / 2.0;
  EXPECT_NEAR(r.log_likelihood, expected, 1e-14);
}

TEST(KfUpdate, ZeroInnovationKeepsMean) {
  std::mt19937_64 rng(3);
  const Vec m = random_vec(4, rng);
  const Mat P = random_spd(4, rng);
  const auto meas = ou_measurement(ModelParams{});
  const Vec y = meas.obs_matrix * m;
  const auto r = kf_update(moments(m, P), y, meas.obs_matrix, meas.obs_noise);
  EXPECT_LT((r.posterior.mean - m).norm(), 1e-12);
}

TEST(KfUpdate, SingularInnovationCarriesMatrix) {
  Vec m(1), y(1);
  m << 0;
  y << 1;
  Mat P(1, 1), H(1, 1), R(1, 1);
  P << 0;
  H << 1;
  R << 0;
  try {
    kf_update(moments(m, P), y, H, R);
    FAIL() << "expected SingularMatrixError";
  } catch (const SingularMatrixError& e) {
    EXPECT_EQ(e.matrix().rows(), 1);
    EXPECT_EQ(e.matrix()(0, 0), 0.0);
  }
}

TEST(KfUpdate, DimensionMismatchThrows) {
  Vec m(2), y(3);
  m << 0, 0;
  y << 0, 0, 0;
  EXPECT_THROW(kf_update(moments(m, Mat::Identity(2, 2)), y, Mat::Identity(2, 2), Mat::Identity(2, 2)),
               std::invalid_argument);
}

// Sequential update likelihoods against the stacked joint density of y_1..y_5.
TEST(KfUpdate, SequentialEqualsJointLikelihoodOn100Seeds) {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    const ModelParams p{std::pow(2.0 + 10.0 * unif(rng), 2), 0.1 + unif(rng), 0.2 + unif(rng)};
    std::vector<double> times{0.0};
    for (int k = 1; k < 5; ++k) times.push_back(times.back() + unif(rng));
    std::vector<Eigen::Vector2d> ys;
    std::normal_distribution<double> z(0.0, 5.0);
    for (int k = 0; k < 5; ++k) ys.emplace_back(50.0 + z(rng), 50.0 + z(rng));
    const oracle::Birth birth = oracle::birth_from_points(ys, p.q, p.lambda);

    GaussianMoments s{Vec(birth.mean), Mat(birth.cov)};
    const auto meas = ou_measurement(p);
    double seq = 0.0;
    for (int k = 0; k < 5; ++k) {
      if (k > 0) {
        const auto tr = ou_discretize(p, times[k] - times[k - 1]);
        s = kf_predict(s, tr.transition, tr.process_noise);
      }
      const auto u = kf_update(s, Vec(ys[static_cast<std::size_t>(k)]), meas.obs_matrix, meas.obs_noise);
      s = u.posterior;
      seq += u.log_likelihood;
    }
    const double joint = oracle::joint_loglik(times, ys, {1, 1, 1, 1, 1}, p.q, p.lambda, p.sigma, birth);
    EXPECT_LT(std::abs(seq - joint) / std::abs(joint), 1e-8) << "seed " << seed;
  }
}

TEST(KfUpdate, CovarianceStaysPsd) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat P = random_spd(4, rng, 1e-6);
    const Vec m = random_vec(4, rng);
    Mat H = Mat::Zero(2, 4);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) H(i, j) = random_vec(1, rng)(0);
    const Mat R = random_spd(2, rng, 1e-3);
    const auto r = kf_update(moments(m, P), random_vec(2, rng), H, R);
    EXPECT_TRUE(r.posterior.cov.isApprox(r.posterior.cov.transpose(), 0.0));
    const double max_prior = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(P)).eigenvalues().maxCoeff();
    const double min_post =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(r.posterior.cov)).eigenvalues().minCoeff();
    EXPECT_GE(min_post, -1e-9 * max_prior);
  }
}

TEST(KfUpdate, HugeNoiseLeavesPredictedMean) {
  std::mt19937_64 rng(5);
  const Vec m = random_vec(4, rng);
  const Mat P = random_spd(4, rng);
  const auto tr = ou_discretize(ModelParams{}, 0.3);
  const auto pred = kf_predict(moments(m, P), tr.transition, tr.process_noise);
  const auto r = kf_update(pred, random_vec(4, rng) * 10.0, Mat::Identity(4, 4), 1e12 * Mat::Identity(4, 4));
  EXPECT_LT((r.posterior.mean - pred.mean).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(GaussianLogpdf, StandardNormalAtZero) {
  Vec x(1), m(1);
  x << 0;
  m << 0;
  EXPECT_NEAR(gaussian_logpdf(x, m, Mat::Identity(1, 1)), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(GaussianLogpdf, SymmetricInArguments) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    const Vec x = random_vec(3, rng), m = random_vec(3, rng);
    const Mat C = random_spd(3, rng);
    EXPECT_DOUBLE_EQ(gaussian_logpdf(x, m, C), gaussian_logpdf(m, x, C));
  }
}

TEST(GaussianLogpdf, MatchesIndependentImplementation) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 20; ++i) {
    const Vec x = random_vec(3, rng), m = random_vec(3, rng);
    const Mat C = random_spd(3, rng);
    EXPECT_NEAR(gaussian_logpdf(x, m, C), oracle::mvn_logpdf(x, m, Eigen::MatrixXd(C)), 1e-11);
  }
}

TEST(GaussianLogpdf, NonPdThrows) {
  Vec x(2), m(2);
  x << 0, 0;
  m << 0, 0;
  Mat C(2, 2);
  C << 1, 2, 2, 1;
  EXPECT_THROW(gaussian_logpdf(x, m, C), SingularMatrixError);
}

TEST(KalmanCounter, CountsExactlyOnOneThread) {
  reset_kalman_calls();
  Vec m(1), y(1);
  m << 0;
  y << 1;
  GaussianMoments s{m, Mat::Identity(1, 1)};
  for (int i = 0; i < 7; ++i) s = kf_predict(s, Mat::Identity(1, 1), Mat::Identity(1, 1));
  for (int i = 0; i < 3; ++i) s = kf_update(s, y, Mat::Identity(1, 1), Mat::Identity(1, 1)).posterior;
  EXPECT_EQ(kalman_calls().predicts, 7u);
  EXPECT_EQ(kalman_calls().updates, 3u);
  EXPECT_EQ(kalman_calls().total(), 10u);
}
