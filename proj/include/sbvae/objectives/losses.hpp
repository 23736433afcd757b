// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/adgrad/mlp.hpp"
#include "sbvae/data/metrics.hpp"
#include "sbvae/oracle/linear_sde.hpp"
#include "sbvae/sde/drift.hpp"
#include "sbvae/sde/schedule.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sbvae::obj {

/// full-sb trains u and s; sbm fixes u = f and trains s'; shifted-sb trains
/// u' and s' around a base drift f.
enum class ModelMode { FullSb, Sbm, ShiftedSb };
std::string to_string(ModelMode m);
ModelMode mode_from_string(const std::string& s);

struct LossBreakdown {
  double prior_term = 0.0;
  double drift_term = 0.0;
  double total = 0.0;
  Eigen::Index n_paths = 0;
  int n_steps = 0;
  double se = 0.0;  // standard error of `total`
  /// Per-path totals; their mean is `total`. Lets callers form standard
  /// errors of differences under common random numbers.
  Vector per_path;
};

/// Gradients keyed by network, filled by the differentiable losses.
class ParameterGradients {
 public:
  /// Zeroed buffers for every network reachable from the given fields.
  void track(const sde::DriftField& field);
  bool tracks(const ad::Mlp& net) const;
  std::vector<double>& of(const ad::Mlp& net);
  const std::vector<double>& of(const ad::Mlp& net) const;
  const std::vector<const ad::Mlp*>& networks() const { return nets_; }
  void zero();

 private:
  std::vector<const ad::Mlp*> nets_;
  std::vector<std::vector<double>> grads_;
};

/// Drift-matching form with the analytic reverse-encode drift:
///   prior = KL(p_T || pi), drift = 1/2 sum_i dt g^-2 E||u - g^2 grad log rho - s||^2
/// over forward paths, knots t_0..t_{N-1}. The prior is closed form when both
/// laws are Gaussian, otherwise a Monte Carlo mean of exact log-densities at
/// the simulated terminal states. Paths start at `x0` and use Wiener streams
/// 0..n-1 of `seed`.
LossBreakdown loss_main_oracle(const oracle::DensityOracle& orc, const sde::DriftField& decoder,
                               const oracle::GaussianMixture& prior, const sde::TimeGrid& grid,
                               const Matrix& x0, std::uint64_t seed);
/// Same, with x0 drawn from the oracle's initial law.
LossBreakdown loss_main_oracle(const oracle::DensityOracle& orc, const sde::DriftField& decoder,
                               const oracle::GaussianMixture& prior, const sde::TimeGrid& grid,
                               Eigen::Index n_paths, std::uint64_t seed);
/// Field-level entry point; throws ModeError for a non-linear encoder.
LossBreakdown loss_main_oracle(const sde::DriftField& encoder, const oracle::GaussianMixture& data,
                               const sde::DriftField& decoder, const oracle::GaussianMixture& prior,
                               const sde::NoiseSchedule& sched, const sde::TimeGrid& grid,
                               Eigen::Index n_paths, std::uint64_t seed);

struct ImplicitOptions {
  ModelMode mode = ModelMode::FullSb;
  bool grad_encoder = true;
  bool grad_decoder = true;
  ad::DivergenceOptions divergence;
  /// Paths per tape; bounds memory without changing results.
  Eigen::Index chunk = 64;
};

/// Trainable form: -E log pi(x_T) + 1/2 sum_i dt g^-2 E[||u - s||^2 - 2 g^2 div s]
/// along forward paths from `data`. When `grads` is given, pathwise gradients
/// flow through every Euler step (noise held fixed) into the tracked
/// networks; sbm mode never differentiates the encoder. Throws NumericError
/// naming the path and step of a non-finite term.
LossBreakdown loss_implicit(const sde::DriftField& encoder, const sde::DriftField& decoder,
                            const oracle::GaussianMixture& prior, const sde::NoiseSchedule& sched,
                            const sde::TimeGrid& grid, const Matrix& data, std::uint64_t seed,
                            const ImplicitOptions& opts = {}, ParameterGradients* grads = nullptr);

/// 1/2 sum_i dt g^2 E||s'(t_i, x) - grad log rho(t_i, x)||^2 over forward paths.
LossBreakdown loss_esm(const sde::DriftField& score_net, const oracle::DensityOracle& orc,
                       const sde::TimeGrid& grid, Eigen::Index n_paths, std::uint64_t seed);

/// Denoising score matching for a linear encoder. Each data point gets a knot
/// t_k, k uniform on 1..N (t_min = dt), x_t from the exact kernel, and the
/// regression target -cov^{-1}(x_t - M x_0 - m). Per-sample loss is
/// T/2 g(t)^2 ||s' - target||^2, so its mean estimates the same time integral
/// as loss_esm up to a constant.
LossBreakdown loss_dsm(const sde::DriftField& score_net, const oracle::LinearSde& sde,
                       const Matrix& data, const sde::TimeGrid& grid, std::uint64_t seed,
                       ParameterGradients* grads = nullptr);

enum class PriorLossMethod { MomentMatched, Knn };

/// Estimate of KL(law(samples) || prior). Moment-matched fits a Gaussian;
/// with a mixture prior it falls back to knn with a warning.
data::MetricResult prior_loss_estimate(const Matrix& samples, const oracle::GaussianMixture& prior,
                                       PriorLossMethod method, std::uint64_t seed = 0);

/// -mean log pi(x) with its standard error.
data::MetricResult prior_cross_entropy(const Matrix& samples, const oracle::GaussianMixture& prior);

}  // namespace sbvae::obj
