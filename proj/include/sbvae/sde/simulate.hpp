// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/sde/drift.hpp"
#include "sbvae/sde/schedule.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace sbvae::sde {

/// One discretized trajectory together with the Wiener increments that drove it.
struct Path {
  TimeGrid grid;
  Matrix states;  // (N+1) x d, row i is x_{t_i}
  Matrix noise;   // N x d, row i is the increment over [t_i, t_{i+1}]
};

/// A batch of trajectories sharing a grid, stored knot-major: states[i] is
/// the n x d matrix of all paths at t_i.
struct PathBundle {
  TimeGrid grid;
  std::vector<Matrix> states;  // N+1 entries
  std::vector<Matrix> noise;   // N entries

  Eigen::Index paths() const { return states.front().rows(); }
  Eigen::Index dim() const { return states.front().cols(); }
  Path path(Eigen::Index p) const;
};

/// Paths whose norm exceeds this are reported as diverged.
inline constexpr double kBlowUpNorm = 1e6;

/// Wiener increments N(0, dt I) for paths first_stream .. first_stream+n-1.
std::vector<Matrix> wiener_increments(const TimeGrid& grid, Eigen::Index n, int dim,
                                      std::uint64_t seed, std::uint64_t first_stream = 0);

/// Pairwise sums of fine increments: the coarse-grid increments of the same
/// Brownian path.
std::vector<Matrix> coarsen_increments(const std::vector<Matrix>& fine);

/// Euler-Maruyama with left-endpoint (Ito) drift and noise:
///   x_{i+1} = x_i + f(t_i, x_i) dt + g(t_i) dw_i.
Path simulate_forward(const DriftField& drift, const NoiseSchedule& sched, const TimeGrid& grid,
                      const Vector& x0, std::uint64_t seed);
PathBundle simulate_forward(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& x0, std::uint64_t seed,
                            std::uint64_t first_stream = 0);
PathBundle simulate_forward(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& x0, std::vector<Matrix> noise);

/// Backward Euler-Maruyama with right-endpoint (reverse-Ito) drift and noise:
///   x_i = x_{i+1} - f(t_{i+1}, x_{i+1}) dt - g(t_{i+1}) dw_i.
Path simulate_reverse(const DriftField& drift, const NoiseSchedule& sched, const TimeGrid& grid,
                      const Vector& xT, std::uint64_t seed);
PathBundle simulate_reverse(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& xT, std::uint64_t seed,
                            std::uint64_t first_stream = 0);
PathBundle simulate_reverse(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& xT, std::vector<Matrix> noise);

/// log P[x_(0,T] | x_0]: sum over steps of log N(x_{i+1}; x_i + f(t_i, x_i) dt, g(t_i)^2 dt I).
double path_log_density_forward(const Path& path, const DriftField& drift,
                                const NoiseSchedule& sched);
Vector path_log_density_forward(const PathBundle& paths, const DriftField& drift,
                                const NoiseSchedule& sched);

/// log P~[x_[0,T) | x_T]: sum over steps of
/// log N(x_i; x_{i+1} - f(t_{i+1}, x_{i+1}) dt, g(t_{i+1})^2 dt I).
double path_log_density_reverse(const Path& path, const DriftField& drift,
                                const NoiseSchedule& sched);
Vector path_log_density_reverse(const PathBundle& paths, const DriftField& drift,
                                const NoiseSchedule& sched);

/// CSV with header t,x1..xd,dw1..dwd; the last row leaves the noise columns empty.
void write_path_csv(std::ostream& out, const Path& path);

}  // namespace sbvae::sde
