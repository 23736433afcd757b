// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/common.hpp"

#include <cstdint>
#include <vector>

namespace sbvae::oracle {

/// Multivariate normal with an SPD covariance.
struct Gaussian {
  Vector mean;
  Matrix cov;

  static Gaussian standard(int dim);
  static Gaussian isotropic(const Vector& mean, double var);
  int dim() const { return static_cast<int>(mean.size()); }
};

/// Finite mixture of Gaussians. Cholesky factors are computed once at
/// construction so log-densities and scores are cheap.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covs);
  /// Single-component mixture.
  explicit GaussianMixture(const Gaussian& g);

  int dim() const { return dim_; }
  std::size_t components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covs() const { return covs_; }
  bool is_gaussian() const { return weights_.size() == 1; }
  Gaussian component(std::size_t k) const { return {means_[k], covs_[k]}; }

  double log_pdf(const Vector& x) const;
  /// One value per row.
  Vector log_pdf(const Matrix& x) const;
  /// grad log p, one row per input row; responsibilities via log-sum-exp.
  Matrix score(const Matrix& x) const;
  Vector score(const Vector& x) const;
  /// Laplacian of log p, one value per row.
  Vector laplacian_log_pdf(const Matrix& x) const;

  Vector mean() const;
  Matrix covariance() const;

  /// Exact samples; row r uses counter stream first_stream + r.
  Matrix sample(Eigen::Index n, std::uint64_t seed, std::uint64_t first_stream = 0) const;

 private:
  // Per-component log N(x; m_k, S_k) + log w_k, n x K.
  Matrix weighted_log_components(const Matrix& x) const;
  // Posterior component probabilities, n x K.
  Matrix responsibilities(const Matrix& x) const;
  // -S_k^{-1} (x - m_k), n x d.
  Matrix component_score(std::size_t k, const Matrix& x) const;

  int dim_ = 0;
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covs_;
  std::vector<Matrix> chol_;  // lower factors
  std::vector<double> log_norm_;
};

/// Closed-form KL(p || q) between Gaussians. Throws ContractError on a
/// singular or non-SPD covariance.
double kl_gaussian(const Gaussian& p, const Gaussian& q);

}  // namespace sbvae::oracle
