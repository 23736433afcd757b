// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/oracle/linear_sde.hpp"
#include "sbvae/random.hpp"
#include "sbvae/sde/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace sbvae::oracle {
namespace {

using sde::NoiseSchedule;
const double kSqrt2 = std::numbers::sqrt2;

Matrix rotation(double a) { return Matrix{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}}; }

TEST(Kernel, ScalarOrnsteinUhlenbeck) {
  const auto sde = LinearSde::ornstein_uhlenbeck(1, 1.0, NoiseSchedule::constant(kSqrt2));
  const auto k = sde.transition_kernel(0.5, 1.5);
  EXPECT_NEAR(k.M(0, 0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(k.cov(0, 0), 1.0 - std::exp(-2.0), 1e-15);
  EXPECT_NEAR(k.m(0), 0.0, 1e-15);
  const auto far = sde.transition_kernel(0.0, 60.0);
  EXPECT_NEAR(far.M(0, 0), 0.0, 1e-20);
  EXPECT_NEAR(far.cov(0, 0), 1.0, 1e-14);
}

TEST(Kernel, Brownian) {
  const auto k = LinearSde::brownian(3, NoiseSchedule::constant(1.0)).transition_kernel(0.2, 1.0);
  EXPECT_LE((k.M - Matrix::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LE((k.cov - 0.8 * Matrix::Identity(3, 3)).norm(), 1e-15);
  const auto lin = NoiseSchedule::linear(0.5, 2.0, 1.0);
  const auto kl = LinearSde::brownian(2, lin).transition_kernel(0.1, 0.9);
  EXPECT_NEAR(kl.cov(0, 0), lin.integrated_g2(0.1, 0.9), 1e-12);
  EXPECT_NEAR(kl.cov(0, 1), 0.0, 1e-15);
}

TEST(Kernel, RequiresForwardTime) {
  const auto sde = LinearSde::brownian(1, NoiseSchedule::constant(1.0));
  EXPECT_THROW(sde.transition_kernel(1.0, 1.0), ContractError);
  EXPECT_THROW(sde.transition_kernel(1.0, 0.5), ContractError);
}

// A rotated diagonal system must match the rotated diagonal solution, which
// exercises the general-matrix paths against the scalar fast path.
TEST(Kernel, GeneralMatrixMatchesRotatedDiagonal) {
  const Matrix Q = rotation(0.7);
  const Matrix D{{-1.5, 0.0}, {0.0, -0.25}};
  const Vector bD{{0.3, -0.8}};
  for (const auto& sched : {NoiseSchedule::constant(0.9), NoiseSchedule::linear(0.4, 1.6, 2.0)}) {
    const LinearSde diag{D, bD, sched};
    const LinearSde rot{Q * D * Q.transpose(), Q * bD, sched};
    const auto kd = diag.transition_kernel(0.3, 1.8);
    const auto kr = rot.transition_kernel(0.3, 1.8);
    EXPECT_LE((kr.M - Q * kd.M * Q.transpose()).norm(), 1e-12);
    EXPECT_LE((kr.m - Q * kd.m).norm(), 1e-12);
    EXPECT_LE((kr.cov - Q * kd.cov * Q.transpose()).norm(), 1e-10);
  }
}

TEST(Kernel, MatchesSimulatedMoments) {
  const auto sched = NoiseSchedule::constant(1.0);
  const LinearSde sde{Matrix{{-1.0, 2.0}, {-2.0, -1.0}}, Vector{{0.5, 0.0}}, sched};
  const Eigen::Index n = 20000;
  const sde::PathBundle b = sde::simulate_forward(sde.drift(), sched, sde::TimeGrid(1.0, 400),
                                                  Matrix(Matrix::Ones(n, 2)), 2);
  const auto k = sde.transition_kernel(0.0, 1.0);
  const Vector mean_exact = k.M * Vector::Ones(2) + k.m;
  const Matrix& xT = b.states.back();
  const Vector mean = xT.colwise().mean();
  for (int j = 0; j < 2; ++j) {
    const double se = std::sqrt(k.cov(j, j) / n);
    EXPECT_LE(std::abs(mean(j) - mean_exact(j)), 3.0 * se + 0.01) << j;
  }
  const Matrix centered = xT.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / double(n - 1);
  EXPECT_LE((cov - k.cov).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Kernel, StationaryLaw) {
  const auto ou = LinearSde::ornstein_uhlenbeck(1, 1.0, NoiseSchedule::constant(kSqrt2));
  const auto st = ou.stationary();
  ASSERT_TRUE(st.has_value());
  EXPECT_NEAR(st->cov(0, 0), 1.0, 1e-14);
  const LinearSde sde{Matrix{{-1.0, 0.5}, {-0.3, -2.0}}, Vector{{1.0, 2.0}}, NoiseSchedule::constant(0.7)};
  const auto s2 = sde.stationary();
  ASSERT_TRUE(s2.has_value());
  const Matrix resid = sde.A * s2->cov + s2->cov * sde.A.transpose() + 0.49 * Matrix::Identity(2, 2);
  EXPECT_LE(resid.norm(), 1e-13);
  EXPECT_LE((sde.A * s2->mean + sde.b).norm(), 1e-13);
  EXPECT_LE((sde.transition_kernel(0.0, 80.0).cov - s2->cov).norm(), 1e-10);
  EXPECT_FALSE(LinearSde::brownian(1, NoiseSchedule::constant(1.0)).stationary().has_value());
  EXPECT_FALSE(LinearSde::ornstein_uhlenbeck(1, 1.0, NoiseSchedule::linear(1, 2, 1)).stationary());
}

TEST(Marginal, InitialAtZeroAndStationary) {
  const auto sched = NoiseSchedule::constant(kSqrt2);
  const GaussianMixture mix({0.3, 0.7}, {Vector{{-1.0}}, Vector{{2.0}}}, {Matrix{{0.5}}, Matrix{{0.2}}});
  const DensityOracle orc(mix, LinearSde::ornstein_uhlenbeck(1, 1.0, sched));
  const auto m0 = orc.marginal(0.0);
  EXPECT_EQ(m0.means()[1](0), 2.0);
  EXPECT_EQ(m0.covs()[0](0, 0), 0.5);
  EXPECT_THROW(orc.marginal(-0.1), ContractError);
  const DensityOracle st(GaussianMixture(Gaussian::standard(1)), LinearSde::ornstein_uhlenbeck(1, 1.0, sched));
  for (double t : {0.1, 0.5, 1.0, 3.0}) {
    EXPECT_NEAR(st.marginal(t).means()[0](0), 0.0, 1e-15);
    EXPECT_NEAR(st.marginal(t).covs()[0](0, 0), 1.0, 1e-14);
  }
}

TEST(Marginal, TwoComponentPropagation) {
  const GaussianMixture mix({0.5, 0.5}, {Vector{{-2.0}}, Vector{{2.0}}}, {Matrix{{0.1}}, Matrix{{0.1}}});
  const DensityOracle orc(mix, LinearSde::ornstein_uhlenbeck(1, 1.0, NoiseSchedule::constant(kSqrt2)));
  const auto m = orc.marginal(1.0);
  const double e = std::exp(-1.0);
  EXPECT_NEAR(m.means()[0](0), -2 * e, 1e-15);
  EXPECT_NEAR(m.means()[1](0), 2 * e, 1e-15);
  EXPECT_NEAR(m.covs()[0](0, 0), 0.1 * e * e + (1 - e * e), 1e-15);
  EXPECT_EQ(m.weights(), mix.weights());
}

TEST(Score, GaussianAndSymmetry) {
  const GaussianMixture n01(Gaussian::standard(1));
  EXPECT_DOUBLE_EQ(n01.score(Vector{{2.0}})(0), -2.0);
  const GaussianMixture sym({0.5, 0.5}, {Vector{{-1.5}}, Vector{{1.5}}}, {Matrix{{0.3}}, Matrix{{0.3}}});
  EXPECT_NEAR(sym.score(Vector{{0.0}})(0), 0.0, 1e-15);
}

TEST(Score, MatchesFiniteDifferenceOfLogPdf) {
  const GaussianMixture m1({0.2, 0.8}, {Vector{{-1.0}}, Vector{{1.0}}}, {Matrix{{0.4}}, Matrix{{0.9}}});
  const double h = 1e-5;
  const double fd = (m1.log_pdf(Vector{{0.5 + h}}) - m1.log_pdf(Vector{{0.5 - h}})) / (2 * h);
  EXPECT_NEAR(m1.score(Vector{{0.5}})(0), fd, 1e-6 * std::abs(fd));
  const GaussianMixture m2({0.25, 0.25, 0.5},
                           {Vector{{0.0, 1.0}}, Vector{{2.0, -1.0}}, Vector{{-1.0, 0.5}}},
                           {Matrix{{1.0, 0.3}, {0.3, 0.5}}, Matrix{{0.2, 0.0}, {0.0, 0.7}},
                            Matrix{{0.6, -0.2}, {-0.2, 0.4}}});
  const Matrix x = CounterRng(3).normal_matrix(0, 0, 10, 2);
  const Matrix s = m2.score(x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (int k = 0; k < 2; ++k) {
      Matrix xp = x.row(r), xm = x.row(r);
      xp(0, k) += h;
      xm(0, k) -= h;
      const double d = (m2.log_pdf(xp)(0) - m2.log_pdf(xm)(0)) / (2 * h);
      EXPECT_NEAR(s(r, k), d, 1e-6 * std::max(1.0, std::abs(d)));
    }
  }
}

TEST(Score, LaplacianMatchesFiniteDifferenceOfScore) {
  const GaussianMixture m({0.25, 0.25, 0.5},
                          {Vector{{0.0, 1.0}}, Vector{{2.0, -1.0}}, Vector{{-1.0, 0.5}}},
                          {Matrix{{1.0, 0.3}, {0.3, 0.5}}, Matrix{{0.2, 0.0}, {0.0, 0.7}},
                           Matrix{{0.6, -0.2}, {-0.2, 0.4}}});
  const Matrix x = CounterRng(4).normal_matrix(0, 0, 10, 2);
  const Vector lap = m.laplacian_log_pdf(x);
  const double h = 1e-5;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double fd = 0.0;
    for (int k = 0; k < 2; ++k) {
      Matrix xp = x.row(r), xm = x.row(r);
      xp(0, k) += h;
      xm(0, k) -= h;
      fd += (m.score(xp)(0, k) - m.score(xm)(0, k)) / (2 * h);
    }
    EXPECT_NEAR(lap(r), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
  // Standard normal: the Laplacian of log p is -d everywhere.
  EXPECT_NEAR(GaussianMixture(Gaussian::standard(3)).laplacian_log_pdf(x.leftCols(1).replicate(1, 3))(0), -3.0, 1e-14);
}

TEST(Mixture, DensityIntegratesToOne) {
  const GaussianMixture m({0.3, 0.7}, {Vector{{-1.0}}, Vector{{2.0}}}, {Matrix{{0.5}}, Matrix{{0.2}}});
  const int n = 20001;
  Matrix grid(n, 1);
  for (int i = 0; i < n; ++i) grid(i, 0) = -10.0 + 20.0 * i / (n - 1);
  const double h = 20.0 / (n - 1);
  EXPECT_NEAR(m.log_pdf(grid).array().exp().sum() * h, 1.0, 1e-9);
}

TEST(Mixture, SampleMoments) {
  const GaussianMixture m({0.3, 0.7}, {Vector{{-1.0, 0.0}}, Vector{{2.0, 1.0}}},
                          {Matrix::Identity(2, 2) * 0.5, Matrix{{0.2, 0.1}, {0.1, 0.3}}});
  const Matrix x = m.sample(40000, 6);
  const Vector mean = x.colwise().mean();
  const Matrix c = x.rowwise() - mean.transpose();
  EXPECT_LE((mean - m.mean()).norm(), 0.03);
  EXPECT_LE((c.transpose() * c / 40000.0 - m.covariance()).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Mixture, InvalidInputsRejected) {
  EXPECT_THROW(GaussianMixture({0.5, 0.4}, {Vector{{0.0}}, Vector{{1.0}}}, {Matrix{{1.0}}, Matrix{{1.0}}}),
               ContractError);
  EXPECT_THROW(GaussianMixture({1.0}, {Vector{{0.0, 0.0}}}, {Matrix{{1.0, 2.0}, {2.0, 1.0}}}),
               ContractError);
}

TEST(ReverseDrift, StationaryIsPlusX) {
  const auto sched = NoiseSchedule::constant(kSqrt2);
  const DensityOracle orc(GaussianMixture(Gaussian::standard(1)), LinearSde::ornstein_uhlenbeck(1, 1.0, sched));
  EXPECT_NEAR(orc.reverse_drift(0.4, Vector{{1.7}})(0), 1.7, 1e-14);
}

TEST(ReverseDrift, BrownianGaussianConvolution) {
  const double s0 = 0.6, g = 1.3, t = 0.7;
  const DensityOracle orc(GaussianMixture(Gaussian{Vector{{0.0}}, Matrix{{s0 * s0}}}),
                          LinearSde::brownian(1, NoiseSchedule::constant(g)));
  EXPECT_NEAR(orc.reverse_drift(t, Vector{{0.9}})(0), g * g * 0.9 / (s0 * s0 + g * g * t), 1e-14);
}

TEST(ReverseDrift, SymmetryPointIsEncoderDrift) {
  const GaussianMixture sym({0.5, 0.5}, {Vector{{-1.0, 0.0}}, Vector{{1.0, 0.0}}},
                            {Matrix::Identity(2, 2) * 0.2, Matrix::Identity(2, 2) * 0.2});
  const LinearSde sde{-Matrix::Identity(2, 2), Vector::Zero(2), NoiseSchedule::constant(1.0)};
  const DensityOracle orc(sym, sde);
  EXPECT_LE(orc.reverse_drift(0.5, Vector(Vector::Zero(2))).norm(), 1e-15);
}

TEST(Kl, ClosedForms) {
  const Gaussian a{Vector{{0.0}}, Matrix{{1.0}}};
  EXPECT_NEAR(kl_gaussian(a, a), 0.0, 1e-15);
  EXPECT_NEAR(kl_gaussian(a, Gaussian{Vector{{1.0}}, Matrix{{1.0}}}), 0.5, 1e-15);
  EXPECT_NEAR(kl_gaussian(Gaussian{Vector{{0.0}}, Matrix{{2.0}}}, a), 0.5 * (1.0 - std::log(2.0)), 1e-15);
  EXPECT_THROW(kl_gaussian(Gaussian{Vector::Zero(2), Matrix{{1.0, 1.0}, {1.0, 1.0}}}, Gaussian::standard(2)),
               ContractError);
}

}  // namespace
}  // namespace sbvae::oracle
