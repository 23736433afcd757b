// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/oracle/gaussian.hpp"
#include "sbvae/sde/drift.hpp"
#include "sbvae/sde/schedule.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace sbvae::sampler {

enum class Method { Sde, PfOdeSb, PfOdeSbm };
enum class OdeScheme { Heun, Rk4 };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::string to_string(OdeScheme s);
OdeScheme scheme_from_string(const std::string& s);

struct SamplerConfig {
  Method method = Method::Sde;
  Eigen::Index n_samples = 1000;
  /// SDE: Euler-Maruyama steps. ODE: initial integrator steps.
  int steps = 128;
  OdeScheme scheme = OdeScheme::Heun;
  std::uint64_t seed = 0;
  /// Step-halving retries after an unstable ODE integration.
  int max_halvings = 4;
};

/// Prior draws shared by every method for a given seed, so SDE and ODE
/// outputs are paired sample by sample.
Matrix prior_draws(const oracle::GaussianMixture& prior, Eigen::Index n, std::uint64_t seed);

/// z ~ pi, then the decode SDE backward to t = 0 with right-endpoint
/// Euler-Maruyama over `steps` uniform steps on [0, horizon].
Matrix sample_sde(const sde::DriftField& decoder, const oracle::GaussianMixture& prior,
                  const sde::NoiseSchedule& sched, double horizon, const SamplerConfig& cfg);

using OdeField = std::function<Matrix(double, const Matrix&)>;

/// Integrates dx/dt = v(t, x) from t = horizon down to 0. On a non-finite or
/// blown-up state the step count is doubled and the run restarted, up to
/// `max_halvings` times; then DivergenceError.
Matrix integrate_backward(const OdeField& v, const Matrix& xT, double horizon, int steps,
                          OdeScheme scheme, int max_halvings = 4);

/// Averaged-drift flow dx/dt = (u + s) / 2 from z ~ pi.
Matrix sample_ode(const sde::DriftField& encoder, const sde::DriftField& decoder,
                  const oracle::GaussianMixture& prior, double horizon, const SamplerConfig& cfg);

/// dx/dt = f - g^2 s' / 2 from z ~ pi.
Matrix sample_ode_sbm(const sde::DriftField& base, const sde::DriftField& score_net,
                      const sde::NoiseSchedule& sched, const oracle::GaussianMixture& prior,
                      double horizon, const SamplerConfig& cfg);

}  // namespace sbvae::sampler
