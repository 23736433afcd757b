// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/oracle/linear_sde.hpp"
#include "sbvae/random.hpp"
#include "sbvae/sde/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

namespace sbvae::sde {
namespace {

const double kSqrt2 = std::numbers::sqrt2;

DriftField ou(int d) { return DriftField::linear(-Matrix::Identity(d, d), Vector::Zero(d)); }

TEST(Simulate, NoDriftNoNoiseIsConstant) {
  const Path p = simulate_forward(DriftField::zero(2), NoiseSchedule::constant(0.0),
                                  TimeGrid(1.0, 16), Vector{{0.3, -1.0}}, 5);
  for (Eigen::Index i = 0; i < p.states.rows(); ++i) {
    EXPECT_EQ(p.states(i, 0), 0.3);
    EXPECT_EQ(p.states(i, 1), -1.0);
  }
  const Path r = simulate_reverse(DriftField::zero(2), NoiseSchedule::constant(0.0),
                                  TimeGrid(1.0, 16), Vector{{0.3, -1.0}}, 5);
  EXPECT_EQ(r.states.row(0), p.states.row(0));
}

TEST(Simulate, OrnsteinUhlenbeckMoments) {
  const Eigen::Index n = 10000;
  const PathBundle b = simulate_forward(ou(1), NoiseSchedule::constant(kSqrt2), TimeGrid(1.0, 256),
                                        Matrix(Matrix::Constant(n, 1, 3.0)), 11);
  const Vector xT = b.states.back().col(0);
  const double mean = xT.mean();
  const double var = (xT.array() - mean).square().sum() / (n - 1);
  const double m_exact = 3.0 * std::exp(-1.0);
  const double v_exact = 1.0 - std::exp(-2.0);
  EXPECT_LE(std::abs(mean - m_exact), 3.0 * std::sqrt(v_exact / n));
  EXPECT_LE(std::abs(var - v_exact), 3.0 * v_exact * std::sqrt(2.0 / (n - 1)));
}

TEST(Simulate, BrownianVarianceIsHorizon) {
  const Eigen::Index n = 10000;
  const PathBundle b = simulate_forward(DriftField::zero(1), NoiseSchedule::constant(1.0),
                                        TimeGrid(2.0, 32), Matrix(Matrix::Zero(n, 1)), 4);
  const double var = b.states.back().squaredNorm() / n;
  EXPECT_LE(std::abs(var - 2.0), 3.0 * 2.0 * std::sqrt(2.0 / n));
}

TEST(Simulate, StoredNoiseRegeneratesStatesExactly) {
  const TimeGrid grid(1.0, 40);
  const auto sched = NoiseSchedule::linear(0.5, 1.5, 1.0);
  const DriftField f = DriftField::linear(Matrix{{-1.0, 0.4}, {-0.2, -0.5}}, Vector{{0.1, 0.0}});
  const Matrix x0 = CounterRng(2).normal_matrix(0, 0, 8, 2);
  const PathBundle a = simulate_forward(f, sched, grid, x0, 31, 100);
  const PathBundle b = simulate_forward(f, sched, grid, x0, a.noise);
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
  const PathBundle r = simulate_reverse(f, sched, grid, x0, 31, 100);
  const PathBundle s = simulate_reverse(f, sched, grid, x0, r.noise);
  for (std::size_t i = 0; i < r.states.size(); ++i) EXPECT_EQ(r.states[i], s.states[i]);
  // The stored relation holds as written.
  const Path p = a.path(3);
  for (int i = 0; i < grid.steps(); ++i) {
    const Vector x = p.states.row(i).transpose();
    const Vector step = f.eval(grid.t(i), x) * grid.dt() + sched(grid.t(i)) * p.noise.row(i).transpose();
    EXPECT_EQ(p.states.row(i + 1).transpose(), x + step);
  }
}

TEST(Simulate, ReverseSingleStepConstantDrift) {
  const Path p = simulate_reverse(DriftField::constant(Vector{{2.0}}), NoiseSchedule::constant(0.0),
                                  TimeGrid(0.1, 1), Vector{{1.0}}, 0);
  EXPECT_DOUBLE_EQ(p.states(0, 0), 1.0 - 2.0 * 0.1);
}

TEST(Simulate, ReverseOracleRecoversData) {
  const Eigen::Index n = 10000;
  const auto sched = NoiseSchedule::constant(kSqrt2);
  const oracle::DensityOracle orc(oracle::GaussianMixture(oracle::Gaussian::standard(1)),
                                  oracle::LinearSde::ornstein_uhlenbeck(1, 1.0, sched));
  const Matrix xT = orc.initial().sample(n, 8);
  const PathBundle b = simulate_reverse(orc.reverse_drift_field(), sched, TimeGrid(1.0, 256), xT, 9);
  const Vector x0 = b.states.front().col(0);
  const double mean = x0.mean();
  const double var = (x0.array() - mean).square().sum() / (n - 1);
  EXPECT_LE(std::abs(mean), 3.0 / std::sqrt(double(n)));
  // Euler adds an O(dt) variance bias on top of sampling error.
  EXPECT_LE(std::abs(var - 1.0), 3.0 * std::sqrt(2.0 / (n - 1)) + 4.0 / 256);
}

TEST(Simulate, DivergenceGuardReportsPathAndStep) {
  const Matrix x0 = Matrix::Ones(3, 1);
  try {
    simulate_forward(DriftField::linear(Matrix::Constant(1, 1, 50.0), Vector::Zero(1)),
                     NoiseSchedule::constant(0.1), TimeGrid(1.0, 10), x0, 1, 20);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.path_index, 20);
    EXPECT_EQ(e.step_index, 8);  // 6^8 > 1e6 > 6^7
  }
}

TEST(PathDensity, OneStepGaussian) {
  Path p{TimeGrid(0.01, 1), Matrix{{0.0}, {0.1}}, Matrix{{0.1}}};
  const double expected = -0.5 * std::log(2 * std::numbers::pi * 0.01) - 0.01 / (2 * 0.01);
  EXPECT_NEAR(path_log_density_forward(p, DriftField::zero(1), NoiseSchedule::constant(1.0)),
              expected, 1e-13);
  // Constant drift c, evaluated at the right endpoint: mean x1 - c dt.
  const double c = 3.0;
  const double mean = 0.1 - c * 0.01;
  const double rev = -0.5 * std::log(2 * std::numbers::pi * 0.01) - mean * mean / (2 * 0.01);
  EXPECT_NEAR(path_log_density_reverse(p, DriftField::constant(Vector{{c}}),
                                       NoiseSchedule::constant(1.0)),
              rev, 1e-13);
}

TEST(PathDensity, ZeroDriftIsTimeSymmetric) {
  const auto sched = NoiseSchedule::constant(0.7);
  const PathBundle b = simulate_forward(DriftField::zero(2), sched, TimeGrid(1.0, 20),
                                        Matrix(Matrix::Zero(5, 2)), 3);
  const Vector f = path_log_density_forward(b, DriftField::zero(2), sched);
  const Vector r = path_log_density_reverse(b, DriftField::zero(2), sched);
  EXPECT_LE((f - r).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PathDensity, SelfDensityIsNoiseQuadraticForm) {
  const auto sched = NoiseSchedule::constant(1.3);
  const TimeGrid grid(1.0, 25);
  const PathBundle b = simulate_forward(ou(2), sched, grid, Matrix(Matrix::Ones(4, 2)), 6);
  const Vector lp = path_log_density_forward(b, ou(2), sched);
  for (Eigen::Index p = 0; p < 4; ++p) {
    double quad = 0.0;
    for (const auto& dw : b.noise) quad += dw.row(p).squaredNorm();
    const double var = 1.3 * 1.3 * grid.dt();
    const double expected = -0.5 * 2 * grid.steps() * std::log(2 * std::numbers::pi * var) -
                            0.5 * 1.3 * 1.3 * quad / var;
    EXPECT_NEAR(lp(p), expected, 1e-9 * std::abs(expected));
  }
}

TEST(PathDensity, DriftChangeIsDiscreteGirsanovRatio) {
  const auto sched = NoiseSchedule::constant(0.8);
  const TimeGrid grid(1.0, 30);
  const DriftField f2 = ou(2);
  const DriftField f1 = DriftField::linear(Matrix{{0.3, 1.0}, {-1.0, 0.2}}, Vector{{0.5, -0.1}});
  const PathBundle b = simulate_forward(f2, sched, grid, Matrix(Matrix::Zero(6, 2)), 12);
  const Vector diff = path_log_density_forward(b, f1, sched) - path_log_density_forward(b, f2, sched);
  for (Eigen::Index p = 0; p < 6; ++p) {
    double expected = 0.0;
    for (int i = 0; i < grid.steps(); ++i) {
      const Matrix& x = b.states[static_cast<std::size_t>(i)];
      const RowVector gap = (f1.eval(grid.t(i), x) - f2.eval(grid.t(i), x)).row(p);
      expected += gap.dot(b.noise[static_cast<std::size_t>(i)].row(p)) / 0.8 -
                  gap.squaredNorm() * grid.dt() / (2 * 0.64);
    }
    EXPECT_NEAR(diff(p), expected, 1e-10);
  }
}

// log P + log mu(x0) = log P~ + log rho(T, xT) along every path, in the limit dt -> 0.
TEST(PathDensity, BayesTimeReversal) {
  const auto sched = NoiseSchedule::constant(kSqrt2);
  const oracle::DensityOracle orc(
      oracle::GaussianMixture(oracle::Gaussian{Vector{{1.0}}, Matrix{{0.25}}}),
      oracle::LinearSde::ornstein_uhlenbeck(1, 1.0, sched));
  const Eigen::Index n = 1000;
  const TimeGrid grid(1.0, 512);
  const PathBundle b = simulate_forward(orc.encoder_field(), sched, grid, orc.initial().sample(n, 4), 5);
  const Vector residual = path_log_density_forward(b, orc.encoder_field(), sched) +
                          orc.initial().log_pdf(b.states.front()) -
                          path_log_density_reverse(b, orc.reverse_drift_field(), sched) -
                          orc.marginal(1.0).log_pdf(b.states.back());
  EXPECT_LE(std::abs(residual.mean()), 5.0 / std::sqrt(double(n)) + 2.0 * grid.dt());
}

TEST(PathDensity, VanishingNoiseIsDegenerate) {
  const PathBundle b = simulate_forward(DriftField::zero(1), NoiseSchedule::constant(0.0),
                                        TimeGrid(1.0, 4), Matrix(Matrix::Zero(2, 1)), 0);
  EXPECT_THROW(path_log_density_forward(b, DriftField::zero(1), NoiseSchedule::constant(0.0)),
               DegenerateError);
  EXPECT_THROW(path_log_density_reverse(b, DriftField::zero(1), NoiseSchedule::linear(0.0, 1.0, 1.0)),
               DegenerateError);
}

TEST(Simulate, EulerWeakErrorIsFirstOrder) {
  // With g = 0 the Euler mean is deterministic: x0 (1 - dt)^N.
  double last = 0.0;
  for (int n : {16, 32, 64, 128}) {
    const Path p = simulate_forward(ou(1), NoiseSchedule::constant(0.0), TimeGrid(1.0, n),
                                    Vector{{1.0}}, 0);
    const double err = std::abs(p.states(n, 0) - std::exp(-1.0));
    if (last > 0.0) {
      EXPECT_GT(last / err, 1.8);
      EXPECT_LT(last / err, 2.2);
    }
    last = err;
  }
}

TEST(PathCsv, HeaderAndEmptyLastNoise) {
  const Path p = simulate_forward(DriftField::zero(2), NoiseSchedule::constant(1.0),
                                  TimeGrid(1.0, 2), Vector{{0.0, 0.0}}, 1);
  std::ostringstream out;
  write_path_csv(out, p);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1,x2,dw1,dw2");
  std::string last;
  while (std::getline(in, line)) last = line;
  EXPECT_EQ(last.substr(0, 2), "1,");
  EXPECT_EQ(last.substr(last.size() - 2), ",,");
}

TEST(Schedule, LinearIntegratedSquare) {
  const auto s = NoiseSchedule::linear(0.5, 2.0, 2.0);
  EXPECT_DOUBLE_EQ(s(1.0), 1.25);
  // int_0^2 (0.5 + 0.75 t)^2 dt
  EXPECT_NEAR(s.integrated_g2(0.0, 2.0), 0.5 + 1.5 + 0.75 * 0.75 * 8.0 / 3.0, 1e-12);
  EXPECT_THROW(NoiseSchedule::constant(0.0).require_positive("test"), ConfigError);
}

}  // namespace
}  // namespace sbvae::sde
