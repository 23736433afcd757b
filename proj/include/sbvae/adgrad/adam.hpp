// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/adgrad/parameters.hpp"

#include <span>
#include <vector>

namespace sbvae::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Gradients with a larger global L2 norm are rescaled to this norm. 0 disables.
  double clip_norm = 0.0;
};

/// First and second moment estimates, one entry per parameter.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  static AdamState zeros(std::size_t count) {
    return {std::vector<double>(count, 0.0), std::vector<double>(count, 0.0), 0};
  }
};

/// One bias-corrected Adam update in place. Throws NumericError naming the
/// first non-finite gradient entry; parameters are untouched in that case.
void adam_step(ParameterSet& params, std::span<const double> grad, AdamState& state,
               const AdamConfig& cfg);

}  // namespace sbvae::ad
