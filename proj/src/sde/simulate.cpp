// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/sde/simulate.hpp"

#include "sbvae/random.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace sbvae::sde {
namespace {

void guard(const Matrix& x, int step, std::uint64_t first_stream) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double norm = x.row(r).norm();
    if (!std::isfinite(norm) || norm > kBlowUpNorm) {
      const auto path = static_cast<std::int64_t>(first_stream) + r;
      throw DivergenceError("simulation diverged: path " + std::to_string(path) + " at step " +
                                std::to_string(step) + " (|x| = " + std::to_string(norm) + ")",
                            path, step);
    }
  }
}

void check_noise(const TimeGrid& grid, const Matrix& x, const std::vector<Matrix>& noise) {
  if (static_cast<int>(noise.size()) != grid.steps()) {
    throw ShapeError("noise: expected " + std::to_string(grid.steps()) + " increments, got " +
                     std::to_string(noise.size()));
  }
  for (const auto& dw : noise) {
    if (dw.rows() != x.rows() || dw.cols() != x.cols()) {
      throw ShapeError("noise: increment shape does not match state batch");
    }
  }
}

// Sum over rows of log N(target; mean, var I), one value per row.
Vector gaussian_log_pdf_rows(const Matrix& target, const Matrix& mean, double var) {
  const double d = static_cast<double>(target.cols());
  const double norm = -0.5 * d * std::log(2.0 * std::numbers::pi * var);
  return (norm - 0.5 * (target - mean).rowwise().squaredNorm().array() / var).matrix();
}

}  // namespace

Path PathBundle::path(Eigen::Index p) const {
  const auto d = dim();
  Path out{grid, Matrix(grid.steps() + 1, d), Matrix(grid.steps(), d)};
  for (int i = 0; i <= grid.steps(); ++i) out.states.row(i) = states[static_cast<std::size_t>(i)].row(p);
  for (int i = 0; i < grid.steps(); ++i) out.noise.row(i) = noise[static_cast<std::size_t>(i)].row(p);
  return out;
}

std::vector<Matrix> wiener_increments(const TimeGrid& grid, Eigen::Index n, int dim,
                                      std::uint64_t seed, std::uint64_t first_stream) {
  const CounterRng rng(seed);
  const double scale = std::sqrt(grid.dt());
  std::vector<Matrix> noise;
  noise.reserve(static_cast<std::size_t>(grid.steps()));
  for (int i = 0; i < grid.steps(); ++i) {
    noise.push_back(scale * rng.normal_matrix(first_stream, static_cast<std::uint32_t>(i), n, dim));
  }
  return noise;
}

std::vector<Matrix> coarsen_increments(const std::vector<Matrix>& fine) {
  if (fine.size() % 2 != 0) throw ShapeError("coarsen_increments: odd number of steps");
  std::vector<Matrix> coarse;
  coarse.reserve(fine.size() / 2);
  for (std::size_t i = 0; i < fine.size(); i += 2) coarse.push_back(fine[i] + fine[i + 1]);
  return coarse;
}

PathBundle simulate_forward(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& x0, std::vector<Matrix> noise) {
  if (x0.cols() != drift.dim()) throw ShapeError("simulate_forward: x0 dimension mismatch");
  check_noise(grid, x0, noise);
  PathBundle out{grid, {}, std::move(noise)};
  out.states.reserve(static_cast<std::size_t>(grid.steps() + 1));
  out.states.push_back(x0);
  guard(x0, 0, 0);
  const double dt = grid.dt();
  for (int i = 0; i < grid.steps(); ++i) {
    const double t = grid.t(i);
    const Matrix& x = out.states.back();
    Matrix next = x + (drift.eval(t, x) * dt + sched(t) * out.noise[static_cast<std::size_t>(i)]);
    guard(next, i + 1, 0);
    out.states.push_back(std::move(next));
  }
  return out;
}

PathBundle simulate_forward(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& x0, std::uint64_t seed,
                            std::uint64_t first_stream) {
  auto noise = wiener_increments(grid, x0.rows(), static_cast<int>(x0.cols()), seed, first_stream);
  try {
    return simulate_forward(drift, sched, grid, x0, std::move(noise));
  } catch (const DivergenceError& e) {
    const auto path = static_cast<std::int64_t>(first_stream) + e.path_index;
    throw DivergenceError("simulation diverged: path " + std::to_string(path) + " at step " +
                              std::to_string(e.step_index),
                          path, e.step_index);
  }
}

Path simulate_forward(const DriftField& drift, const NoiseSchedule& sched, const TimeGrid& grid,
                      const Vector& x0, std::uint64_t seed) {
  return simulate_forward(drift, sched, grid, Matrix(x0.transpose()), seed, 0).path(0);
}

PathBundle simulate_reverse(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& xT, std::vector<Matrix> noise) {
  if (xT.cols() != drift.dim()) throw ShapeError("simulate_reverse: xT dimension mismatch");
  check_noise(grid, xT, noise);
  const int n = grid.steps();
  PathBundle out{grid, std::vector<Matrix>(static_cast<std::size_t>(n + 1)), std::move(noise)};
  out.states[static_cast<std::size_t>(n)] = xT;
  guard(xT, n, 0);
  const double dt = grid.dt();
  for (int i = n - 1; i >= 0; --i) {
    const double t = grid.t(i + 1);
    const Matrix& x = out.states[static_cast<std::size_t>(i + 1)];
    Matrix prev = x - (drift.eval(t, x) * dt + sched(t) * out.noise[static_cast<std::size_t>(i)]);
    guard(prev, i, 0);
    out.states[static_cast<std::size_t>(i)] = std::move(prev);
  }
  return out;
}

PathBundle simulate_reverse(const DriftField& drift, const NoiseSchedule& sched,
                            const TimeGrid& grid, const Matrix& xT, std::uint64_t seed,
                            std::uint64_t first_stream) {
  auto noise = wiener_increments(grid, xT.rows(), static_cast<int>(xT.cols()), seed, first_stream);
  try {
    return simulate_reverse(drift, sched, grid, xT, std::move(noise));
  } catch (const DivergenceError& e) {
    const auto path = static_cast<std::int64_t>(first_stream) + e.path_index;
    throw DivergenceError("reverse simulation diverged: path " + std::to_string(path) +
                              " at step " + std::to_string(e.step_index),
                          path, e.step_index);
  }
}

Path simulate_reverse(const DriftField& drift, const NoiseSchedule& sched, const TimeGrid& grid,
                      const Vector& xT, std::uint64_t seed) {
  return simulate_reverse(drift, sched, grid, Matrix(xT.transpose()), seed, 0).path(0);
}

Vector path_log_density_forward(const PathBundle& paths, const DriftField& drift,
                                const NoiseSchedule& sched) {
  if (sched.degenerate()) throw DegenerateError("path density: g vanishes on [0, T]");
  const TimeGrid& grid = paths.grid;
  const double dt = grid.dt();
  Vector total = Vector::Zero(paths.paths());
  for (int i = 0; i < grid.steps(); ++i) {
    const double t = grid.t(i);
    const double g = sched(t);
    if (!(g > 0.0)) {
      throw DegenerateError("forward path density: g(" + std::to_string(t) + ") = 0");
    }
    const Matrix& x = paths.states[static_cast<std::size_t>(i)];
    const Matrix mean = x + drift.eval(t, x) * dt;
    total += gaussian_log_pdf_rows(paths.states[static_cast<std::size_t>(i + 1)], mean, g * g * dt);
  }
  return total;
}

Vector path_log_density_reverse(const PathBundle& paths, const DriftField& drift,
                                const NoiseSchedule& sched) {
  if (sched.degenerate()) throw DegenerateError("path density: g vanishes on [0, T]");
  const TimeGrid& grid = paths.grid;
  const double dt = grid.dt();
  Vector total = Vector::Zero(paths.paths());
  for (int i = 0; i < grid.steps(); ++i) {
    const double t = grid.t(i + 1);
    const double g = sched(t);
    if (!(g > 0.0)) {
      throw DegenerateError("reverse path density: g(" + std::to_string(t) + ") = 0");
    }
    const Matrix& x = paths.states[static_cast<std::size_t>(i + 1)];
    const Matrix mean = x - drift.eval(t, x) * dt;
    total += gaussian_log_pdf_rows(paths.states[static_cast<std::size_t>(i)], mean, g * g * dt);
  }
  return total;
}

namespace {

PathBundle as_bundle(const Path& path) {
  PathBundle b{path.grid, {}, {}};
  for (Eigen::Index i = 0; i < path.states.rows(); ++i) b.states.push_back(path.states.row(i));
  for (Eigen::Index i = 0; i < path.noise.rows(); ++i) b.noise.push_back(path.noise.row(i));
  return b;
}

}  // namespace

double path_log_density_forward(const Path& path, const DriftField& drift,
                                const NoiseSchedule& sched) {
  return path_log_density_forward(as_bundle(path), drift, sched)(0);
}

double path_log_density_reverse(const Path& path, const DriftField& drift,
                                const NoiseSchedule& sched) {
  return path_log_density_reverse(as_bundle(path), drift, sched)(0);
}

void write_path_csv(std::ostream& out, const Path& path) {
  const auto d = path.states.cols();
  out << "t";
  for (Eigen::Index k = 1; k <= d; ++k) out << ",x" << k;
  for (Eigen::Index k = 1; k <= d; ++k) out << ",dw" << k;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < path.states.rows(); ++i) {
    out << path.grid.t(static_cast<int>(i));
    for (Eigen::Index k = 0; k < d; ++k) out << ',' << path.states(i, k);
    for (Eigen::Index k = 0; k < d; ++k) {
      out << ',';
      if (i < path.noise.rows()) out << path.noise(i, k);
    }
    out << '\n';
  }
}

}  // namespace sbvae::sde
