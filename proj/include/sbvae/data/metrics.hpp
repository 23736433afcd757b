// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/oracle/linear_sde.hpp"
#include "sbvae/sde/drift.hpp"
#include "sbvae/sde/schedule.hpp"

#include <cstdint>
#include <string>

namespace sbvae::data {

struct MetricResult {
  std::string name;
  double value = 0.0;
  Eigen::Index n = 0;
  double se = 0.0;  // 0 when not applicable
  std::string note;
};

/// Exact W2 between two 1-D empirical measures; sizes may differ.
double wasserstein2_1d(Vector a, Vector b);

/// Mean over random unit directions of the 1-D W2 between projected samples.
/// Symmetric in (a, b). `se` is the spread over directions.
MetricResult sliced_wasserstein2(const Matrix& a, const Matrix& b, int n_projections,
                                 std::uint64_t seed);

/// k-nearest-neighbour estimate of KL(law(a) || law(b)). Brute force; exact
/// duplicates get 1e-9 jitter and a warning.
MetricResult knn_kl(const Matrix& a, const Matrix& b, int k = 5, std::uint64_t seed = 0);

/// Time average over knots t_1..t_N of g(t)^2 E||s'(t, x) - grad log rho(t, x)||^2
/// with x drawn from the oracle marginal.
MetricResult score_mse(const sde::DriftField& score_net, const oracle::DensityOracle& orc,
                       const sde::TimeGrid& grid, Eigen::Index points_per_time,
                       std::uint64_t seed);

}  // namespace sbvae::data
