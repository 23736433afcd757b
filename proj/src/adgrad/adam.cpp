// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/adgrad/adam.hpp"

#include <cmath>

namespace sbvae::ad {

void adam_step(ParameterSet& params, std::span<const double> grad, AdamState& state,
               const AdamConfig& cfg) {
  const std::size_t n = params.count();
  if (grad.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ShapeError("adam_step: gradient/moment length does not match parameter count");
  }
  double norm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) {
      std::string where = "index " + std::to_string(i);
      for (const auto& l : params.layers()) {
        if (i >= l.offset && i < l.offset + l.size()) {
          where = "'" + l.name + "' entry " + std::to_string(i - l.offset);
        }
      }
      throw NumericError("adam_step: non-finite gradient at " + where);
    }
    norm2 += grad[i] * grad[i];
  }
  double scale = 1.0;
  if (cfg.clip_norm > 0.0 && norm2 > cfg.clip_norm * cfg.clip_norm) {
    scale = cfg.clip_norm / std::sqrt(norm2);
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto p = params.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = scale * grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace sbvae::ad
