// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/common.hpp"

#include <algorithm>
#include <string>

namespace sbvae::sde {

/// Uniform grid t_i = i * T / N on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, int n_steps);

  double horizon() const { return horizon_; }
  int steps() const { return n_steps_; }
  double dt() const { return horizon_ / n_steps_; }
  double t(int i) const { return i == n_steps_ ? horizon_ : i * dt(); }

  /// Same horizon, twice the steps.
  TimeGrid refined() const { return TimeGrid(horizon_, 2 * n_steps_); }

 private:
  double horizon_;
  int n_steps_;
};

/// Scalar diffusion intensity g(t).
class NoiseSchedule {
 public:
  enum class Kind { Constant, Linear };

  static NoiseSchedule constant(double g);
  /// g(t) = g_min + (g_max - g_min) t / T.
  static NoiseSchedule linear(double g_min, double g_max, double horizon);

  double operator()(double t) const;
  double g(double t) const { return (*this)(t); }
  double g2(double t) const {
    const double v = g(t);
    return v * v;
  }
  /// Integral of g(r)^2 over [s, t].
  double integrated_g2(double s, double t) const;

  Kind kind() const { return kind_; }
  double g_min() const { return g_min_; }
  double g_max() const { return g_max_; }
  double horizon() const { return horizon_; }

  /// True when g vanishes somewhere on [0, T]; densities are then undefined.
  bool degenerate() const { return std::min(g_min_, g_max_) <= 0.0; }
  /// Throws ConfigError unless g(t) >= g_min > 0.
  void require_positive(const std::string& context) const;

 private:
  NoiseSchedule(Kind kind, double g_min, double g_max, double horizon);

  Kind kind_;
  double g_min_;
  double g_max_;
  double horizon_;
};

}  // namespace sbvae::sde
