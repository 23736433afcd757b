// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/oracle/linear_sde.hpp"
#include "sbvae/sampler/sampler.hpp"
#include "sbvae/sde/drift.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sbvae::verify {

/// Outcome of one identity check. pass iff discrepancy <= tolerance.
struct CheckReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  std::int64_t n = 0;
  bool pass = false;
  /// Monte Carlo standard error entering the tolerance (0 for exact checks).
  double se = 0.0;
  /// Discretization allowance entering the tolerance.
  double allowance = 0.0;
  std::string note;

  void decide() { pass = discrepancy <= tolerance; }
  /// One line of JSON; non-finite numbers are written as null.
  std::string to_json() const;
};

/// Joint law over finite alphabets: rows index x, columns index z.
class DiscreteJoint {
 public:
  /// Throws ContractError unless entries are >= 0 and sum to 1 within 1e-12.
  explicit DiscreteJoint(Matrix p);

  const Matrix& p() const { return p_; }
  Vector marginal_x() const { return p_.rowwise().sum(); }
  Vector marginal_z() const { return p_.colwise().sum().transpose(); }

 private:
  Matrix p_;
};

/// KL between discrete laws; +inf on a support violation.
double kl_discrete(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q);

/// KL(P(x,z) || Q(x,z)) - KL(P(x) || Q(x)) against E_P[KL(P(z|x) || Q(z|x))].
CheckReport check_dpi(const DiscreteJoint& p, const DiscreteJoint& q);

/// KL(P(x,z) || Q(x,z)) against E[log mu] + E_mu[KL(P(z|x) || prior)] - E[log Q(x|z)].
/// `encoder` is |X| x |Z| with rows P(.|x); `decoder` is |Z| x |X| with rows Q(.|z).
CheckReport check_elbo_decomposition(const Vector& mu, const Matrix& encoder, const Matrix& decoder,
                                     const Vector& prior);

/// Random full-support instances with Dirichlet(1, ..., 1) rows.
CheckReport run_dpi_suite(int instances, int nx, int nz, std::uint64_t seed);
CheckReport run_elbo_suite(int instances, int nx, int nz, std::uint64_t seed);

/// Reverse paths of the oracle are scored twice: (a) the mean pathwise log-ratio
/// of the reverse path densities under the exact reverse drift and under
/// `decoder`; (b) the quadratic form sum dt/(2 g^2) |u~ - s|^2. Tolerance is
/// 3 combined SE plus |b_N - b_2N| from a rerun on the refined grid with the
/// same Brownian paths.
struct GirsanovResult {
  CheckReport report;
  double direct = 0.0;
  double direct_se = 0.0;
  double quadratic = 0.0;
  double quadratic_se = 0.0;
  double martingale_mean = 0.0;
  double martingale_se = 0.0;
};
GirsanovResult check_girsanov_reverse(const oracle::DensityOracle& orc, const sde::DriftField& decoder,
                                      const sde::TimeGrid& grid, Eigen::Index n_paths,
                                      std::uint64_t seed);

/// E_p[grad log p . f] + E_p[div f] = 0 for one field, at t = 0.
CheckReport check_ibp_identity(const sde::DriftField& field, const oracle::GaussianMixture& p,
                               Eigen::Index n_samples, std::uint64_t seed);
/// The same over `fields` random tanh networks; discrepancy is the worst
/// |estimate| / SE, tolerance 3.
CheckReport run_ibp_suite(int fields, const oracle::GaussianMixture& p, Eigen::Index n_samples,
                          std::uint64_t seed);

/// loss_main_oracle - loss_implicit for each decoder under common random
/// numbers. Passes when the sample SD of the differences is at most 3 times
/// their mean Monte Carlo SE.
CheckReport check_loss_offset_constant(const oracle::DensityOracle& orc,
                                       const std::vector<sde::DriftField>& decoders,
                                       const oracle::GaussianMixture& prior, const sde::TimeGrid& grid,
                                       Eigen::Index n_paths, std::uint64_t seed);

/// Probability-flow ODE from the exact terminal marginal with the oracle score.
/// Compares the mean per-coordinate variance at t = 0 with the initial law's,
/// relative tolerance `rel_tol`.
CheckReport check_pf_ode_marginals(const oracle::DensityOracle& orc, double horizon,
                                   const sampler::SamplerConfig& cfg, double rel_tol);

/// Sliced W2 between pf-ode-sb and SDE samples of the same model and seed.
CheckReport check_ode_vs_sde(const sde::DriftField& encoder, const sde::DriftField& decoder,
                             const oracle::GaussianMixture& prior, const sde::NoiseSchedule& sched,
                             double horizon, const sampler::SamplerConfig& sde_cfg,
                             const sampler::SamplerConfig& ode_cfg, double threshold);

/// Oracle-backed suite used by `sbvae verify`. The Girsanov check perturbs the
/// exact reverse drift by a constant of norm `perturbation`.
std::vector<CheckReport> run_all(std::uint64_t seed, double perturbation = 0.5);

void write_jsonl(std::ostream& out, const std::vector<CheckReport>& reports);
void write_summary(std::ostream& out, const std::vector<CheckReport>& reports);

}  // namespace sbvae::verify
