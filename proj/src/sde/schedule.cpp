// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/sde/schedule.hpp"

#include <cmath>

namespace sbvae::sde {

TimeGrid::TimeGrid(double horizon, int n_steps) : horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("time grid: horizon must be positive and finite");
  }
  if (n_steps < 1) throw ConfigError("time grid: need at least one step");
}

NoiseSchedule::NoiseSchedule(Kind kind, double g_min, double g_max, double horizon)
    : kind_(kind), g_min_(g_min), g_max_(g_max), horizon_(horizon) {
  if (!std::isfinite(g_min) || !std::isfinite(g_max) || g_min < 0.0 || g_max < 0.0) {
    throw ConfigError("noise schedule: intensities must be finite and non-negative");
  }
}

NoiseSchedule NoiseSchedule::constant(double g) { return {Kind::Constant, g, g, 1.0}; }

NoiseSchedule NoiseSchedule::linear(double g_min, double g_max, double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("noise schedule: horizon must be positive");
  return {Kind::Linear, g_min, g_max, horizon};
}

double NoiseSchedule::operator()(double t) const {
  if (kind_ == Kind::Constant) return g_max_;
  return g_min_ + (g_max_ - g_min_) * t / horizon_;
}

double NoiseSchedule::integrated_g2(double s, double t) const {
  if (kind_ == Kind::Constant) return g_max_ * g_max_ * (t - s);
  // g is affine, so g^2 integrates exactly to (g(t)^3 - g(s)^3) / (3 g').
  const double slope = (g_max_ - g_min_) / horizon_;
  if (slope == 0.0) return g_min_ * g_min_ * (t - s);
  const double gs = g(s);
  const double gt = g(t);
  return (gt * gt * gt - gs * gs * gs) / (3.0 * slope);
}

void NoiseSchedule::require_positive(const std::string& context) const {
  if (!(std::min(g_min_, g_max_) > 0.0)) {
    throw ConfigError(context + ": noise intensity must satisfy g(t) >= g_min > 0 (got g_min=" +
                      std::to_string(g_min_) + ", g_max=" + std::to_string(g_max_) + ")");
  }
}

}  // namespace sbvae::sde
