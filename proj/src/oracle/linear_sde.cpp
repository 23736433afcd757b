// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/oracle/linear_sde.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>

namespace sbvae::oracle {
namespace {

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

bool is_diagonal(const Matrix& A) {
  return (A - Matrix(A.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
}

// (e^{a tau} - 1) / a, stable near a = 0.
double expm1_over(double a, double tau) {
  return std::abs(a * tau) < 1e-12 ? tau : std::expm1(a * tau) / a;
}

}  // namespace

Matrix expm(const Matrix& A) {
  if (A.rows() != A.cols()) throw ShapeError("expm: matrix not square");
  return A.exp();
}

LinearSde LinearSde::ornstein_uhlenbeck(int dim, double alpha, const sde::NoiseSchedule& sched) {
  return {-alpha * Matrix::Identity(dim, dim), Vector::Zero(dim), sched};
}

LinearSde LinearSde::brownian(int dim, const sde::NoiseSchedule& sched) {
  return {Matrix::Zero(dim, dim), Vector::Zero(dim), sched};
}

TransitionKernel LinearSde::transition_kernel(double s, double t) const {
  if (!(t > s)) {
    throw ContractError("transition_kernel: need t > s (got s = " + std::to_string(s) +
                        ", t = " + std::to_string(t) + ")");
  }
  const int d = dim();
  if (A.rows() != d || A.cols() != d) throw ShapeError("LinearSde: A and b disagree");
  const double tau = t - s;
  TransitionKernel k;

  if (is_diagonal(A)) {
    const Vector a = A.diagonal();
    k.M = Matrix::Zero(d, d);
    k.m = Vector(d);
    k.cov = Matrix::Zero(d, d);
    for (int j = 0; j < d; ++j) {
      k.M(j, j) = std::exp(a(j) * tau);
      k.m(j) = b(j) * expm1_over(a(j), tau);
    }
    if (sched.kind() == sde::NoiseSchedule::Kind::Constant) {
      const double g2 = sched.g2(s);
      for (int j = 0; j < d; ++j) k.cov(j, j) = g2 * expm1_over(2.0 * a(j), tau);
      return k;
    }
  } else {
    // Augmented exponential gives M and the drift offset in one shot.
    Matrix aug = Matrix::Zero(d + 1, d + 1);
    aug.topLeftCorner(d, d) = A * tau;
    aug.topRightCorner(d, 1) = b * tau;
    const Matrix E = expm(aug);
    k.M = E.topLeftCorner(d, d);
    k.m = E.topRightCorner(d, 1);
    if (sched.kind() == sde::NoiseSchedule::Kind::Constant) {
      // Van Loan block exponential on a short interval h = tau / 2^j, then
      // j doublings; a single long block overflows through e^{-A tau}.
      const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
      int halvings = 0;
      while (norm * tau / std::ldexp(1.0, halvings) > 0.5 && halvings < 60) ++halvings;
      const double h = std::ldexp(tau, -halvings);
      Matrix M = expm(A * h);
      Matrix C = Matrix::Zero(2 * d, 2 * d);
      C.topLeftCorner(d, d) = -A * h;
      C.topRightCorner(d, d) = sched.g2(s) * h * Matrix::Identity(d, d);
      C.bottomRightCorner(d, d) = A.transpose() * h;
      const Matrix F = expm(C);
      Matrix cov = F.bottomRightCorner(d, d).transpose() * F.topRightCorner(d, d);
      for (int j = 0; j < halvings; ++j) {
        cov = (M * cov * M.transpose() + cov).eval();
        M = (M * M).eval();
      }
      k.cov = 0.5 * (cov + cov.transpose());
      return k;
    }
  }

  // Time-varying g: composite Gauss-Legendre on
  //   int_s^t e^{A (t-r)} e^{A^T (t-r)} g(r)^2 dr.
  const double scale = A.cwiseAbs().rowwise().sum().maxCoeff() * tau;
  const int pieces = 4 + static_cast<int>(std::ceil(4.0 * scale));
  const double h = tau / pieces;
  k.cov = Matrix::Zero(d, d);
  for (int p = 0; p < pieces; ++p) {
    const double mid = s + (p + 0.5) * h;
    for (std::size_t q = 0; q < kGlNodes.size(); ++q) {
      const double r = mid + 0.5 * h * kGlNodes[q];
      const Matrix Phi = expm(A * (t - r));
      k.cov += (0.5 * h * kGlWeights[q] * sched.g2(r)) * Phi * Phi.transpose();
    }
  }
  k.cov = 0.5 * (k.cov + k.cov.transpose()).eval();
  return k;
}

std::optional<Gaussian> LinearSde::stationary() const {
  if (sched.kind() != sde::NoiseSchedule::Kind::Constant) return std::nullopt;
  const Eigen::ComplexEigenSolver<Matrix> eig(A);
  if (eig.eigenvalues().real().maxCoeff() >= 0.0) return std::nullopt;
  const int d = dim();
  const Matrix I = Matrix::Identity(d, d);
  // vec(A S + S A^T) = (I kron A + A kron I) vec(S).
  const Matrix K = Eigen::kroneckerProduct(I, A) + Eigen::kroneckerProduct(A, I);
  const Matrix rhs = -sched.g2(0.0) * I;
  const Vector vecS = K.partialPivLu().solve(Eigen::Map<const Vector>(rhs.data(), d * d));
  Matrix S = Eigen::Map<const Matrix>(vecS.data(), d, d);
  S = 0.5 * (S + S.transpose()).eval();
  return Gaussian{-A.partialPivLu().solve(b), S};
}

DensityOracle::DensityOracle(GaussianMixture initial, LinearSde sde)
    : initial_(std::move(initial)), sde_(std::move(sde)) {
  if (initial_.dim() != sde_.dim()) throw ShapeError("DensityOracle: dimension mismatch");
}

GaussianMixture DensityOracle::marginal(double t) const {
  if (t < 0.0) throw ContractError("DensityOracle: t must be >= 0");
  if (t == 0.0) return initial_;
  const TransitionKernel k = sde_.transition_kernel(0.0, t);
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t c = 0; c < initial_.components(); ++c) {
    means.push_back(k.M * initial_.means()[c] + k.m);
    Matrix S = k.M * initial_.covs()[c] * k.M.transpose() + k.cov;
    covs.push_back(0.5 * (S + S.transpose()));
  }
  return GaussianMixture(initial_.weights(), std::move(means), std::move(covs));
}

Matrix DensityOracle::score(double t, const Matrix& x) const { return marginal(t).score(x); }

Vector DensityOracle::score_divergence(double t, const Matrix& x) const {
  return marginal(t).laplacian_log_pdf(x);
}

Matrix DensityOracle::reverse_drift(double t, const Matrix& x) const {
  return sde_.drift().eval(t, x) - sde_.sched.g2(t) * score(t, x);
}

Vector DensityOracle::reverse_drift(double t, const Vector& x) const {
  return reverse_drift(t, Matrix(x.transpose())).row(0).transpose();
}

sde::DriftField DensityOracle::reverse_drift_field() const {
  auto self = std::make_shared<const DensityOracle>(*this);
  return sde::DriftField::callable(
      dim(), "oracle-reverse-drift",
      [self](double t, const Matrix& x) { return self->reverse_drift(t, x); },
      [self](double t, const Matrix& x) {
        return Vector(Vector::Constant(x.rows(), self->sde().A.trace()) -
                      self->sde().sched.g2(t) * self->score_divergence(t, x));
      });
}

sde::DriftField DensityOracle::score_field() const {
  auto self = std::make_shared<const DensityOracle>(*this);
  return sde::DriftField::callable(
      dim(), "oracle-score", [self](double t, const Matrix& x) { return self->score(t, x); },
      [self](double t, const Matrix& x) { return self->score_divergence(t, x); });
}

DensityOracle oracle_for(const sde::DriftField& encoder, const GaussianMixture& data,
                         const sde::NoiseSchedule& sched) {
  if (encoder.kind() != sde::DriftField::Kind::Linear) {
    throw ModeError("encoder '" + encoder.describe() +
                    "' has no closed-form marginals; use the implicit loss instead");
  }
  return DensityOracle(data, LinearSde{encoder.linear_matrix(), encoder.linear_offset(), sched});
}

}  // namespace sbvae::oracle
