// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/data/metrics.hpp"

#include "sbvae/random.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace sbvae::data {
namespace {

// k-th smallest Euclidean distance from `q` to rows of `pts`, skipping row `skip`.
double kth_distance(const Matrix& pts, const RowVector& q, int k, Eigen::Index skip) {
  std::priority_queue<double> heap;  // k smallest squared distances
  for (Eigen::Index j = 0; j < pts.rows(); ++j) {
    if (j == skip) continue;
    const double d2 = (pts.row(j) - q).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.push(d2);
    } else if (d2 < heap.top()) {
      heap.pop();
      heap.push(d2);
    }
  }
  return std::sqrt(heap.top());
}

// Exact repeats anywhere in a or b, or shared between them.
bool has_duplicate_rows(const Matrix& a, const Matrix& b) {
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(a.rows() + b.rows()));
  for (const Matrix* m : {&a, &b}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      rows.emplace_back(static_cast<std::size_t>(m->cols()));
      for (Eigen::Index c = 0; c < m->cols(); ++c) rows.back()[static_cast<std::size_t>(c)] = (*m)(r, c);
    }
  }
  std::sort(rows.begin(), rows.end());
  return std::adjacent_find(rows.begin(), rows.end()) != rows.end();
}

}  // namespace

double wasserstein2_1d(Vector a, Vector b) {
  if (a.size() == 0 || b.size() == 0) throw ContractError("wasserstein2_1d: empty sample");
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  // Integrate (Qa(u) - Qb(u))^2 over the merged quantile breakpoints.
  Eigen::Index i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double next_a = static_cast<double>(i + 1) / n;
    const double next_b = static_cast<double>(j + 1) / m;
    const double next = std::min(next_a, next_b);
    const double diff = a(i) - b(j);
    total += (next - u) * diff * diff;
    u = next;
    // Exact ties advance both; a.size() * b.size() products keep this exact.
    const bool adv_a = (j + 1) * a.size() >= (i + 1) * b.size();
    const bool adv_b = (i + 1) * b.size() >= (j + 1) * a.size();
    if (adv_a) ++i;
    if (adv_b) ++j;
  }
  return std::sqrt(std::max(0.0, total));
}

MetricResult sliced_wasserstein2(const Matrix& a, const Matrix& b, int n_projections,
                                 std::uint64_t seed) {
  if (a.cols() != b.cols()) {
    throw ShapeError("sliced_wasserstein2: dimensions differ (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()) + ")");
  }
  if (n_projections < 1) throw ContractError("sliced_wasserstein2: need at least one projection");
  Matrix dirs = CounterRng(seed).normal_matrix(0, 0, n_projections, a.cols());
  Vector w(n_projections);
  for (int p = 0; p < n_projections; ++p) {
    double norm = dirs.row(p).norm();
    if (norm == 0.0) {
      dirs.row(p).setZero();
      dirs(p, 0) = 1.0;
      norm = 1.0;
    }
    const Vector theta = dirs.row(p).transpose() / norm;
    w(p) = wasserstein2_1d(a * theta, b * theta);
  }
  MetricResult r{"sliced_w2", w.mean(), std::min(a.rows(), b.rows()), 0.0, ""};
  if (n_projections > 1) {
    r.se = std::sqrt((w.array() - r.value).square().sum() / (n_projections - 1) / n_projections);
  }
  return r;
}

MetricResult knn_kl(const Matrix& a_in, const Matrix& b_in, int k, std::uint64_t seed) {
  if (a_in.cols() != b_in.cols()) throw ShapeError("knn_kl: dimensions differ");
  if (k < 1 || a_in.rows() <= k || b_in.rows() <= k) {
    throw ContractError("knn_kl: need more than k = " + std::to_string(k) + " samples on each side");
  }
  Matrix a = a_in, b = b_in;
  std::string note;
  if (has_duplicate_rows(a, b)) {
    note = "duplicate points; applied 1e-9 jitter";
    warn("knn_kl: " + note);
    const CounterRng rng(seed);
    a += 1e-9 * rng.normal_matrix(0, 0, a.rows(), a.cols());
    b += 1e-9 * rng.normal_matrix(static_cast<std::uint64_t>(a.rows()), 0, b.rows(), b.cols());
  }
  const Eigen::Index n = a.rows();
  const double d = static_cast<double>(a.cols());
  Vector terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rho = kth_distance(a, a.row(i), k, i);
    const double nu = kth_distance(b, a.row(i), k, -1);
    terms(i) = d * std::log(nu / rho);
  }
  const double m = static_cast<double>(b.rows());
  MetricResult r{"knn_kl", terms.mean() + std::log(m / static_cast<double>(n - 1)), n, 0.0, note};
  r.se = std::sqrt((terms.array() - terms.mean()).square().sum() / static_cast<double>(n - 1) /
                   static_cast<double>(n));
  return r;
}

MetricResult score_mse(const sde::DriftField& score_net, const oracle::DensityOracle& orc,
                       const sde::TimeGrid& grid, Eigen::Index points_per_time,
                       std::uint64_t seed) {
  if (score_net.dim() != orc.dim()) throw ShapeError("score_mse: dimension mismatch");
  if (points_per_time < 2) throw ContractError("score_mse: need at least 2 points per time");
  const auto& sched = orc.sde().sched;
  double total = 0.0, var_sum = 0.0;
  for (int i = 1; i <= grid.steps(); ++i) {
    const double t = grid.t(i);
    const auto law = orc.marginal(t);
    const Matrix x = law.sample(points_per_time, derive_seed(seed, static_cast<std::uint64_t>(i)));
    const Vector err =
        sched.g2(t) * (score_net.eval(t, x) - law.score(x)).rowwise().squaredNorm();
    total += err.mean();
    var_sum += (err.array() - err.mean()).square().sum() / static_cast<double>(points_per_time - 1) /
               static_cast<double>(points_per_time);
  }
  const double N = grid.steps();
  return {"score_mse", total / N, points_per_time * grid.steps(), std::sqrt(var_sum) / N, ""};
}

}  // namespace sbvae::data
