#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rbmcda/gauss_kalman.hpp"
#include "rbmcda/motion_models.hpp"

using namespace rbmcda;

TEST(OuDiscretize, ZeroStepIsIdentity) {
  const auto tr = ou_discretize(ModelParams{}, 0.0);
  EXPECT_EQ(tr.transition, Mat::Identity(4, 4));
  EXPECT_EQ(tr.process_noise, Mat::Zero(4, 4));
}

TEST(OuDiscretize, NegativeStepThrows) { EXPECT_THROW(ou_discretize(ModelParams{}, -0.1), std::invalid_argument); }

TEST(OuDiscretize, BrownianLimit) {
  const ModelParams p{100.0, 1e-8, 0.5};
  const auto tr = ou_discretize(p, 1.0);
  EXPECT_LT((tr.transition - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(tr.process_noise(2, 2) / (p.q * 1.0), 1.0, 1e-6);
  EXPECT_NEAR(tr.process_noise(3, 3) / (p.q * 1.0), 1.0, 1e-6);
}

TEST(OuDiscretize, StructureAndLayout) {
  const ModelParams p{100.0, 0.5, 0.5};
  const double dt = 0.7;
  const auto tr = ou_discretize(p, dt);
  const double b = std::exp(-p.lambda * dt);
  const double s = p.q / (2 * p.lambda) * (1 - std::exp(-2 * p.lambda * dt));
  Mat A = Mat::Zero(4, 4);
  A(0, 0) = A(1, 1) = 1;
  A(2, 0) = A(3, 1) = 1 - b;
  A(2, 2) = A(3, 3) = b;
  EXPECT_LT((tr.transition - A).cwiseAbs().maxCoeff(), 1e-15);
  Mat Q = Mat::Zero(4, 4);
  Q(2, 2) = Q(3, 3) = s;
  EXPECT_LT((tr.process_noise - Q).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OuDiscretize, SemigroupProperty) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const ModelParams p{1.0 + 200.0 * u(rng), 0.01 + u(rng), 0.5};
    const double t1 = u(rng), t2 = u(rng);
    const auto a = ou_discretize(p, t1);
    const auto b = ou_discretize(p, t2);
    const auto ab = ou_discretize(p, t1 + t2);
    const Mat A = b.transition * a.transition;
    const Mat Q = b.transition * a.process_noise * b.transition.transpose() + b.process_noise;
    EXPECT_LT((A - ab.transition).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((Q - ab.process_noise).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, p.q));
  }
}

TEST(OuDiscretize, ProcessNoiseIsPsd) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const ModelParams p{0.01 + u(rng), 0.001 + u(rng), 1.0};
    const auto tr = ou_discretize(p, u(rng));
    const double mn = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(tr.process_noise)).eigenvalues().minCoeff();
    EXPECT_GE(mn, 0.0);
  }
}

TEST(OuDiscretize, StationaryVarianceIsFixedPoint) {
  const ModelParams p{100.0, 0.5, 0.5};
  const double v = ou_stationary_variance(p);
  EXPECT_DOUBLE_EQ(v, 100.0);
  for (const double dt : {0.01, 0.3, 1.0, 5.0}) {
    const auto tr = ou_discretize(p, dt);
    const double b = tr.transition(2, 2);
    EXPECT_NEAR(b * v * b + tr.process_noise(2, 2), v, 1e-10);
  }
}

// Fine-step Euler-Maruyama paths of dp = lambda (mu - p) dt + sqrt(q) dW.
TEST(OuDiscretize, MatchesFineStepSdeSimulation) {
  const ModelParams p{100.0, 0.5, 0.5};
  const double dt = 1.0, mu = 3.0, p0 = -4.0;
  const int substeps = 10'000, paths = 20'000;
  const double h = dt / substeps;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < paths; ++i) {
    double x = p0;
    for (int s = 0; s < substeps; ++s) x += p.lambda * (mu - x) * h + std::sqrt(p.q * h) * z(rng);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / paths;
  const double var = sq / paths - mean * mean;
  const auto tr = ou_discretize(p, dt);
  const double exact_mean = tr.transition(2, 0) * mu + tr.transition(2, 2) * p0;
  const double exact_var = tr.process_noise(2, 2);
  EXPECT_NEAR(mean, exact_mean, 3.0 * std::sqrt(exact_var / paths));
  EXPECT_NEAR(var, exact_var, 3.0 * exact_var * std::sqrt(2.0 / paths));
}

TEST(OuMeasurement, NoiseAndSelection) {
  const auto m = ou_measurement(ModelParams{100, 0.5, 0.5});
  EXPECT_EQ(m.obs_noise, Mat(0.25 * Mat::Identity(2, 2)));
  EXPECT_EQ(ou_measurement(ModelParams{100, 0.5, 1.0}).obs_noise, Mat(Mat::Identity(2, 2)));
  Vec x(4);
  x << 1, 2, 3, 4;
  const Vec y = m.obs_matrix * x;
  EXPECT_EQ(y(0), 3);
  EXPECT_EQ(y(1), 4);
}

TEST(ObservationStats, UnbiasedCovariance) {
  const std::vector<Vec2> pts{{0, 0}, {2, 0}, {0, 2}, {2, 2}};
  const auto s = observation_stats(pts);
  EXPECT_EQ(s.count, 4);
  EXPECT_DOUBLE_EQ(s.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(s.cov(0, 0), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.cov(0, 1), 0.0);
  EXPECT_THROW(observation_stats(std::vector<Vec2>{{1, 1}}), std::invalid_argument);
}

TEST(BirthDensity, ZeroSpreadGivesStationaryLocation) {
  const ModelParams p{100.0, 0.5, 0.5};
  ObservationStats st;
  st.mean = Vec2(10, 20);
  st.count = 5;
  const auto b = ou_birth_density(p, st);
  EXPECT_EQ(b.mean(2), 10.0);
  EXPECT_EQ(b.mean(3), 20.0);
  EXPECT_EQ(b.mean(0), 10.0);
  EXPECT_DOUBLE_EQ(b.cov(2, 2), 100.0);
  EXPECT_DOUBLE_EQ(b.cov(3, 3), 100.0);
  EXPECT_DOUBLE_EQ(b.cov(2, 3), 0.0);
}

TEST(BirthDensity, PsdForRandomSpread) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  for (int i = 0; i < 100; ++i) {
    Mat2 B;
    B << z(rng), z(rng), z(rng), z(rng);
    ObservationStats st;
    st.cov = B * B.transpose();
    st.count = 10;
    for (const bool diag : {false, true}) {
      const auto b = ou_birth_density(ModelParams{1.0 + std::abs(z(rng)), 0.1 + std::abs(z(rng)), 1.0}, st, diag);
      const double mn = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(b.cov)).eigenvalues().minCoeff();
      EXPECT_GE(mn, -1e-12);
    }
  }
}

TEST(BirthDensity, BlockDiagonalSwitchDropsCrossTerms) {
  ObservationStats st;
  st.cov << 4, 1, 1, 9;
  st.count = 3;
  const auto joint = ou_birth_density(ModelParams{}, st, false);
  const auto diag = ou_birth_density(ModelParams{}, st, true);
  EXPECT_DOUBLE_EQ(joint.cov(0, 2), 4.0);
  EXPECT_DOUBLE_EQ(joint.cov(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(diag.cov(0, 2), 0.0);
  // The alternative reading gives the location block the stationary spread only.
  EXPECT_DOUBLE_EQ(diag.cov(2, 2), ou_stationary_variance(ModelParams{}));
  EXPECT_DOUBLE_EQ(diag.cov(0, 0), 4.0);
}

// mu ~ N(ybar, S), p | mu ~ N(mu, v I): sample covariance of (mu, p).
TEST(BirthDensity, MatchesTwoStageSampling) {
  const ModelParams p{100.0, 0.5, 0.5};
  ObservationStats st;
  st.mean = Vec2(40, 60);
  st.cov << 30, 5, 5, 20;
  st.count = 50;
  const auto b = ou_birth_density(p, st);
  const Mat2 L = st.cov.llt().matrixL();
  const double sd = std::sqrt(ou_stationary_variance(p));
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const int n = 400'000;
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  Eigen::Matrix4d sq = Eigen::Matrix4d::Zero();
  for (int i = 0; i < n; ++i) {
    const double e1 = z(rng), e2 = z(rng);
    const Vec2 mu = st.mean + L * Vec2(e1, e2);
    const double f1 = z(rng), f2 = z(rng);
    Eigen::Vector4d x;
    x << mu, mu + sd * Vec2(f1, f2);
    sum += x;
    sq += x * x.transpose();
  }
  const Eigen::Vector4d mean = sum / n;
  const Eigen::Matrix4d cov = sq / n - mean * mean.transpose();
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(mean(i), b.mean(i), 3 * std::sqrt(b.cov(i, i) / n));
    for (int j = 0; j < 4; ++j) {
      const double se = std::sqrt((b.cov(i, i) * b.cov(j, j) + b.cov(i, j) * b.cov(i, j)) / n);
      EXPECT_NEAR(cov(i, j), b.cov(i, j), 3 * se) << i << "," << j;
    }
  }
}
