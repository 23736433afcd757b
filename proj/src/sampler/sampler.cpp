// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/sampler/sampler.hpp"

#include "sbvae/random.hpp"
#include "sbvae/sde/simulate.hpp"

#include <cmath>

namespace sbvae::sampler {
namespace {

constexpr std::uint64_t kPriorTag = 0x7072696f72;
constexpr std::uint64_t kNoiseTag = 0x6e6f697365;

bool unstable(const Matrix& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double norm = x.row(r).norm();
    if (!std::isfinite(norm) || norm > sde::kBlowUpNorm) return true;
  }
  return false;
}

// One pass; returns false on instability.
bool run_backward(const OdeField& v, Matrix& x, double horizon, int steps, OdeScheme scheme) {
  const double h = horizon / steps;
  for (int i = steps; i > 0; --i) {
    const double t = i == steps ? horizon : i * h;
    const double tm = (i - 1) * h;
    if (scheme == OdeScheme::Heun) {
      const Matrix k1 = v(t, x);
      const Matrix pred = x - h * k1;
      x -= 0.5 * h * (k1 + v(tm, pred));
    } else {
      const double mid = t - 0.5 * h;
      const Matrix k1 = v(t, x);
      const Matrix k2 = v(mid, x - 0.5 * h * k1);
      const Matrix k3 = v(mid, x - 0.5 * h * k2);
      const Matrix k4 = v(tm, x - h * k3);
      x -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (unstable(x)) return false;
  }
  return true;
}

void check_common(const oracle::GaussianMixture& prior, int dim, double horizon,
                  const SamplerConfig& cfg, const char* who) {
  if (prior.dim() != dim) throw ShapeError(std::string(who) + ": prior dimension mismatch");
  if (!(horizon > 0.0)) throw ContractError(std::string(who) + ": horizon must be > 0");
  if (cfg.steps < 1) throw ContractError(std::string(who) + ": steps must be >= 1");
  if (cfg.n_samples < 0) throw ContractError(std::string(who) + ": n_samples must be >= 0");
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Sde:
      return "sde";
    case Method::PfOdeSb:
      return "pf-ode-sb";
    case Method::PfOdeSbm:
      return "pf-ode-sbm";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "sde") return Method::Sde;
  if (s == "pf-ode-sb") return Method::PfOdeSb;
  if (s == "pf-ode-sbm") return Method::PfOdeSbm;
  throw ConfigError("unknown sampler method '" + s + "' (expected sde, pf-ode-sb or pf-ode-sbm)");
}

std::string to_string(OdeScheme s) { return s == OdeScheme::Heun ? "heun" : "rk4"; }

OdeScheme scheme_from_string(const std::string& s) {
  if (s == "heun") return OdeScheme::Heun;
  if (s == "rk4") return OdeScheme::Rk4;
  throw ConfigError("unknown ODE scheme '" + s + "' (expected heun or rk4)");
}

Matrix prior_draws(const oracle::GaussianMixture& prior, Eigen::Index n, std::uint64_t seed) {
  return prior.sample(n, derive_seed(seed, kPriorTag));
}

Matrix sample_sde(const sde::DriftField& decoder, const oracle::GaussianMixture& prior,
                  const sde::NoiseSchedule& sched, double horizon, const SamplerConfig& cfg) {
  check_common(prior, decoder.dim(), horizon, cfg, "sample_sde");
  if (cfg.n_samples == 0) return Matrix(0, decoder.dim());
  const Matrix z = prior_draws(prior, cfg.n_samples, cfg.seed);
  const sde::TimeGrid grid(horizon, cfg.steps);
  return sde::simulate_reverse(decoder, sched, grid, z, derive_seed(cfg.seed, kNoiseTag))
      .states.front();
}

Matrix integrate_backward(const OdeField& v, const Matrix& xT, double horizon, int steps,
                          OdeScheme scheme, int max_halvings) {
  for (int attempt = 0; attempt <= max_halvings; ++attempt) {
    Matrix x = xT;
    if (run_backward(v, x, horizon, steps << attempt, scheme)) return x;
    if (attempt < max_halvings) {
      warn("ODE integration unstable at " + std::to_string(steps << attempt) +
           " steps; retrying with half the step size");
    }
  }
  throw DivergenceError("ODE integration unstable after " + std::to_string(max_halvings) +
                            " step halvings",
                        -1, -1);
}

Matrix sample_ode(const sde::DriftField& encoder, const sde::DriftField& decoder,
                  const oracle::GaussianMixture& prior, double horizon, const SamplerConfig& cfg) {
  if (encoder.dim() != decoder.dim()) throw ShapeError("sample_ode: encoder and decoder dimensions differ");
  check_common(prior, decoder.dim(), horizon, cfg, "sample_ode");
  if (cfg.n_samples == 0) return Matrix(0, decoder.dim());
  const OdeField v = [&](double t, const Matrix& x) {
    return Matrix(0.5 * (encoder.eval(t, x) + decoder.eval(t, x)));
  };
  return integrate_backward(v, prior_draws(prior, cfg.n_samples, cfg.seed), horizon, cfg.steps,
                            cfg.scheme, cfg.max_halvings);
}

Matrix sample_ode_sbm(const sde::DriftField& base, const sde::DriftField& score_net,
                      const sde::NoiseSchedule& sched, const oracle::GaussianMixture& prior,
                      double horizon, const SamplerConfig& cfg) {
  if (base.dim() != score_net.dim()) throw ShapeError("sample_ode_sbm: dimension mismatch");
  check_common(prior, base.dim(), horizon, cfg, "sample_ode_sbm");
  if (cfg.n_samples == 0) return Matrix(0, base.dim());
  const OdeField v = [&](double t, const Matrix& x) {
    return Matrix(base.eval(t, x) - 0.5 * sched.g2(t) * score_net.eval(t, x));
  };
  return integrate_backward(v, prior_draws(prior, cfg.n_samples, cfg.seed), horizon, cfg.steps,
                            cfg.scheme, cfg.max_halvings);
}

}  // namespace sbvae::sampler
