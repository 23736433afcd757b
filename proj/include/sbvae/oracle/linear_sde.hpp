// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/oracle/gaussian.hpp"
#include "sbvae/sde/drift.hpp"
#include "sbvae/sde/schedule.hpp"

#include <optional>

namespace sbvae::oracle {

/// Matrix exponential (Eigen MatrixFunctions, scaling and squaring).
Matrix expm(const Matrix& A);

/// Gaussian transition law x_t | x_s ~ N(M x_s + m, cov).
struct TransitionKernel {
  Matrix M;
  Vector m;
  Matrix cov;
};

/// dX = (A X + b) dt + g(t) dw.
struct LinearSde {
  Matrix A;
  Vector b;
  sde::NoiseSchedule sched;

  /// dX = -alpha X dt + g dw in `dim` dimensions.
  static LinearSde ornstein_uhlenbeck(int dim, double alpha, const sde::NoiseSchedule& sched);
  static LinearSde brownian(int dim, const sde::NoiseSchedule& sched);

  int dim() const { return static_cast<int>(b.size()); }
  sde::DriftField drift() const { return sde::DriftField::linear(A, b); }

  /// Exact kernel from time s to time t > s. Throws ContractError when t <= s.
  TransitionKernel transition_kernel(double s, double t) const;

  /// N(-A^{-1} b, S) with A S + S A^T + g^2 I = 0, when A is Hurwitz and g is
  /// constant; nullopt otherwise.
  std::optional<Gaussian> stationary() const;
};

/// Closed-form marginals rho(t, .) of a LinearSde started from a Gaussian
/// mixture: each component is pushed through the transition kernel.
class DensityOracle {
 public:
  DensityOracle(GaussianMixture initial, LinearSde sde);

  const GaussianMixture& initial() const { return initial_; }
  const LinearSde& sde() const { return sde_; }
  int dim() const { return initial_.dim(); }

  GaussianMixture marginal(double t) const;
  /// grad log rho(t, x), one row per input row.
  Matrix score(double t, const Matrix& x) const;
  /// Laplacian of log rho(t, .), the divergence of the score.
  Vector score_divergence(double t, const Matrix& x) const;
  /// Exact time-reverse-encode drift u(t, x) - g(t)^2 grad log rho(t, x).
  Matrix reverse_drift(double t, const Matrix& x) const;
  Vector reverse_drift(double t, const Vector& x) const;

  sde::DriftField encoder_field() const { return sde_.drift(); }
  sde::DriftField reverse_drift_field() const;
  /// grad log rho(t, x) packaged as a field, e.g. an ideal score network.
  sde::DriftField score_field() const;

 private:
  GaussianMixture initial_;
  LinearSde sde_;
};

/// Oracle for an encoder given as a field. Throws ModeError unless the field
/// is linear, since no closed-form marginals exist otherwise.
DensityOracle oracle_for(const sde::DriftField& encoder, const GaussianMixture& data,
                         const sde::NoiseSchedule& sched);

}  // namespace sbvae::oracle
