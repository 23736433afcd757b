// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/oracle/gaussian.hpp"

#include "sbvae/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace sbvae::oracle {
namespace {

Matrix cholesky_or_throw(const Matrix& cov, const char* who) {
  if (cov.rows() != cov.cols()) throw ShapeError(std::string(who) + ": covariance not square");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw ContractError(std::string(who) + ": covariance is not symmetric positive definite");
  }
  Matrix L = llt.matrixL();
  if (L.diagonal().minCoeff() <= 1e-300) {
    throw ContractError(std::string(who) + ": covariance is singular");
  }
  return L;
}

}  // namespace

Gaussian Gaussian::standard(int dim) { return {Vector::Zero(dim), Matrix::Identity(dim, dim)}; }

Gaussian Gaussian::isotropic(const Vector& mean, double var) {
  const auto d = mean.size();
  return {mean, var * Matrix::Identity(d, d)};
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<Matrix> covs)
    : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covs)) {
  if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != covs_.size()) {
    throw ShapeError("mixture: weights, means and covariances must have equal nonzero length");
  }
  dim_ = static_cast<int>(means_[0].size());
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("mixture: weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ContractError("mixture: weights must sum to 1 (got " + std::to_string(total) + ")");
  }
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (means_[k].size() != dim_ || covs_[k].rows() != dim_) {
      throw ShapeError("mixture: component dimensions disagree");
    }
    chol_.push_back(cholesky_or_throw(covs_[k], "mixture"));
    const double logdet = 2.0 * chol_.back().diagonal().array().log().sum();
    log_norm_.push_back(-0.5 * (dim_ * std::log(2.0 * std::numbers::pi) + logdet));
  }
}

GaussianMixture::GaussianMixture(const Gaussian& g)
    : GaussianMixture({1.0}, {g.mean}, {g.cov}) {}

Matrix GaussianMixture::weighted_log_components(const Matrix& x) const {
  if (x.cols() != dim_) throw ShapeError("mixture: input dimension mismatch");
  const auto K = static_cast<Eigen::Index>(weights_.size());
  Matrix out(x.rows(), K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double logw = weights_[ku] > 0.0 ? std::log(weights_[ku])
                                           : -std::numeric_limits<double>::infinity();
    Matrix centered = (x.rowwise() - means_[ku].transpose()).transpose();  // d x n
    chol_[ku].triangularView<Eigen::Lower>().solveInPlace(centered);
    out.col(k) = (log_norm_[ku] + logw - 0.5 * centered.colwise().squaredNorm().array()).matrix()
                     .transpose();
  }
  return out;
}

Vector GaussianMixture::log_pdf(const Matrix& x) const {
  const Matrix lc = weighted_log_components(x);
  Vector out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = lc.row(r).maxCoeff();
    out(r) = m + std::log((lc.row(r).array() - m).exp().sum());
  }
  return out;
}

double GaussianMixture::log_pdf(const Vector& x) const {
  return log_pdf(Matrix(x.transpose()))(0);
}

Matrix GaussianMixture::responsibilities(const Matrix& x) const {
  const Matrix lc = weighted_log_components(x);
  Matrix resp(lc.rows(), lc.cols());
  for (Eigen::Index r = 0; r < lc.rows(); ++r) {
    const double m = lc.row(r).maxCoeff();
    resp.row(r) = (lc.row(r).array() - m).exp();
    resp.row(r) /= resp.row(r).sum();
  }
  return resp;
}

Matrix GaussianMixture::component_score(std::size_t k, const Matrix& x) const {
  // Two triangular solves against the Cholesky factor.
  Matrix centered = (x.rowwise() - means_[k].transpose()).transpose();
  chol_[k].triangularView<Eigen::Lower>().solveInPlace(centered);
  chol_[k].transpose().triangularView<Eigen::Upper>().solveInPlace(centered);
  return -centered.transpose();
}

Matrix GaussianMixture::score(const Matrix& x) const {
  const Matrix resp = responsibilities(x);
  Matrix out = Matrix::Zero(x.rows(), dim_);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    out += (component_score(k, x).array().colwise() * resp.col(static_cast<Eigen::Index>(k)).array())
               .matrix();
  }
  return out;
}

// Hessian of log p is sum_k r_k (v_k v_k^T - S_k^{-1}) - score score^T.
Vector GaussianMixture::laplacian_log_pdf(const Matrix& x) const {
  const Matrix resp = responsibilities(x);
  Vector out = Vector::Zero(x.rows());
  Matrix total = Matrix::Zero(x.rows(), dim_);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const Matrix v = component_score(k, x);
    const Matrix linv = chol_[k].triangularView<Eigen::Lower>().solve(Matrix::Identity(dim_, dim_));
    const auto rk = resp.col(static_cast<Eigen::Index>(k)).array();
    out.array() += rk * (v.rowwise().squaredNorm().array() - linv.squaredNorm());
    total += (v.array().colwise() * rk).matrix();
  }
  return out - total.rowwise().squaredNorm();
}

Vector GaussianMixture::score(const Vector& x) const {
  return score(Matrix(x.transpose())).row(0).transpose();
}

Vector GaussianMixture::mean() const {
  Vector m = Vector::Zero(dim_);
  for (std::size_t k = 0; k < weights_.size(); ++k) m += weights_[k] * means_[k];
  return m;
}

Matrix GaussianMixture::covariance() const {
  const Vector m = mean();
  Matrix c = Matrix::Zero(dim_, dim_);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const Vector dm = means_[k] - m;
    c += weights_[k] * (covs_[k] + dm * dm.transpose());
  }
  return c;
}

Matrix GaussianMixture::sample(Eigen::Index n, std::uint64_t seed,
                               std::uint64_t first_stream) const {
  const CounterRng rng(seed);
  Matrix out(n, dim_);
  std::vector<double> cumulative(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative.begin());
  std::vector<double> z(static_cast<std::size_t>(dim_));
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::uint64_t stream = first_stream + static_cast<std::uint64_t>(r);
    const double u = rng.uniform(stream, 1, 0);
    std::size_t k = 0;
    while (k + 1 < cumulative.size() && u > cumulative[k]) ++k;
    rng.normals(stream, 0, z);
    const Eigen::Map<const Vector> zv(z.data(), dim_);
    out.row(r) = (means_[k] + chol_[k] * zv).transpose();
  }
  return out;
}

double kl_gaussian(const Gaussian& p, const Gaussian& q) {
  if (p.dim() != q.dim()) throw ShapeError("kl_gaussian: dimension mismatch");
  const Matrix Lp = cholesky_or_throw(p.cov, "kl_gaussian");
  const Matrix Lq = cholesky_or_throw(q.cov, "kl_gaussian");
  const double d = p.dim();
  // tr(Sq^{-1} Sp) = ||Lq^{-1} Lp||_F^2
  const Matrix A = Lq.triangularView<Eigen::Lower>().solve(Lp);
  const Vector diff = Lq.triangularView<Eigen::Lower>().solve(q.mean - p.mean);
  const double logdet_p = 2.0 * Lp.diagonal().array().log().sum();
  const double logdet_q = 2.0 * Lq.diagonal().array().log().sum();
  return 0.5 * (A.squaredNorm() + diff.squaredNorm() - d + logdet_q - logdet_p);
}

}  // namespace sbvae::oracle
