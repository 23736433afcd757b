// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/verify/checks.hpp"

#include "sbvae/data/metrics.hpp"
#include "sbvae/objectives/losses.hpp"
#include "sbvae/random.hpp"
#include "sbvae/sde/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>

namespace sbvae::verify {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kExactTol = 1e-12;

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double mean_of(const Vector& v) { return v.mean(); }

double se_of(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(n - 1) / static_cast<double>(n));
}

// Rows of an nx x nz matrix drawn from Dirichlet(1, ..., 1).
Matrix dirichlet_rows(const CounterRng& rng, std::uint64_t stream, std::uint32_t step, int rows, int cols) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(r, c) = -std::log(rng.uniform(stream, step, static_cast<std::uint32_t>(r * cols + c)));
    }
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

// Combines two quantities that may be infinite; inf - inf counts as agreement.
double inf_aware_gap(double lhs, double rhs) {
  if (std::isinf(lhs) || std::isinf(rhs)) return std::isinf(lhs) && std::isinf(rhs) ? 0.0 : kInf;
  return std::abs(lhs - rhs);
}

std::shared_ptr<ad::Mlp> random_field_net(int dim, std::uint64_t seed, bool time_features) {
  ad::MlpSpec spec;
  spec.dim = dim;
  spec.hidden = {16};
  spec.time_features = time_features;
  spec.zero_final_layer = false;
  return std::make_shared<ad::Mlp>(ad::Mlp::create(spec, seed));
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string CheckReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["lhs"] = number(lhs);
  j["rhs"] = number(rhs);
  j["discrepancy"] = number(discrepancy);
  j["tolerance"] = number(tolerance);
  j["n"] = n;
  j["se"] = number(se);
  j["allowance"] = number(allowance);
  j["verdict"] = pass ? "pass" : "fail";
  if (!note.empty()) j["note"] = note;
  return j.dump();
}

DiscreteJoint::DiscreteJoint(Matrix p) : p_(std::move(p)) {
  if (p_.size() == 0) throw ContractError("DiscreteJoint: empty table");
  if ((p_.array() < 0.0).any() || !p_.allFinite()) {
    throw ContractError("DiscreteJoint: entries must be finite and >= 0");
  }
  if (std::abs(p_.sum() - 1.0) > kExactTol) throw ContractError("DiscreteJoint: entries must sum to 1");
}

double kl_discrete(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q) {
  if (p.size() != q.size()) throw ShapeError("kl_discrete: size mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) return kInf;
    acc += p(i) * std::log(p(i) / q(i));
  }
  return acc;
}

CheckReport check_dpi(const DiscreteJoint& p, const DiscreteJoint& q) {
  if (p.p().rows() != q.p().rows() || p.p().cols() != q.p().cols()) {
    throw ShapeError("check_dpi: alphabet sizes differ");
  }
  const Matrix& P = p.p();
  const Matrix& Q = q.p();
  const Vector px = p.marginal_x(), qx = q.marginal_x();
  const double joint = kl_discrete(Eigen::Map<const Vector>(P.data(), P.size()),
                                   Eigen::Map<const Vector>(Q.data(), Q.size()));
  const double marg = kl_discrete(px, qx);
  double cond = 0.0;
  for (Eigen::Index x = 0; x < P.rows(); ++x) {
    if (px(x) <= 0.0) continue;
    if (qx(x) <= 0.0) {
      cond = kInf;
      break;
    }
    cond += px(x) * kl_discrete(P.row(x).transpose() / px(x), Q.row(x).transpose() / qx(x));
  }
  CheckReport r;
  r.name = "dpi_chain_rule";
  r.n = 1;
  r.tolerance = kExactTol;
  r.rhs = cond;
  if (std::isinf(joint)) {
    r.lhs = kInf;
    r.discrepancy = std::isinf(marg) || std::isinf(cond) ? 0.0 : kInf;
    r.note = "support violation: infinite KL";
  } else {
    r.lhs = joint - marg;
    r.discrepancy = std::max(std::abs(r.lhs - cond), std::max(0.0, marg - joint));
  }
  r.decide();
  return r;
}

CheckReport check_elbo_decomposition(const Vector& mu, const Matrix& encoder, const Matrix& decoder,
                                     const Vector& prior) {
  const Eigen::Index nx = mu.size(), nz = prior.size();
  if (encoder.rows() != nx || encoder.cols() != nz || decoder.rows() != nz || decoder.cols() != nx) {
    throw ShapeError("check_elbo_decomposition: table shapes do not match the alphabets");
  }
  auto normalized = [](const Eigen::Ref<const Vector>& v) {
    return (v.array() >= 0.0).all() && std::abs(v.sum() - 1.0) <= 1e-12;
  };
  bool ok = normalized(mu) && normalized(prior);
  for (Eigen::Index x = 0; x < nx; ++x) ok = ok && normalized(encoder.row(x).transpose());
  for (Eigen::Index z = 0; z < nz; ++z) ok = ok && normalized(decoder.row(z).transpose());
  if (!ok) throw ContractError("check_elbo_decomposition: tables must be normalized");

  double lhs = 0.0, entropy = 0.0, kl_prior = 0.0, recon = 0.0;
  for (Eigen::Index x = 0; x < nx; ++x) {
    if (mu(x) <= 0.0) continue;
    entropy += mu(x) * std::log(mu(x));
    kl_prior += mu(x) * kl_discrete(encoder.row(x).transpose(), prior);
    for (Eigen::Index z = 0; z < nz; ++z) {
      const double pj = mu(x) * encoder(x, z);
      if (pj <= 0.0) continue;
      const double qj = prior(z) * decoder(z, x);
      lhs += qj > 0.0 ? pj * std::log(pj / qj) : kInf;
      recon += decoder(z, x) > 0.0 ? pj * std::log(decoder(z, x)) : -kInf;
    }
  }
  CheckReport r;
  r.name = "elbo_decomposition";
  r.n = 1;
  r.lhs = lhs;
  r.rhs = entropy + kl_prior - recon;
  r.tolerance = kExactTol;
  r.discrepancy = inf_aware_gap(r.lhs, r.rhs);
  if (std::isinf(r.lhs) || std::isinf(r.rhs)) r.note = "support violation: infinite KL";
  r.decide();
  return r;
}

CheckReport run_dpi_suite(int instances, int nx, int nz, std::uint64_t seed) {
  if (instances < 1 || nx < 1 || nz < 1) throw ContractError("run_dpi_suite: sizes must be positive");
  const CounterRng rng(seed);
  CheckReport agg;
  agg.name = "dpi_random_instances";
  agg.n = instances;
  agg.tolerance = kExactTol;
  int violations = 0;
  for (int k = 0; k < instances; ++k) {
    // One Dirichlet draw over the flattened alphabet per joint.
    const Matrix p = dirichlet_rows(rng, static_cast<std::uint64_t>(k), 0, 1, nx * nz).reshaped(nx, nz);
    const Matrix q = dirichlet_rows(rng, static_cast<std::uint64_t>(k), 1, 1, nx * nz).reshaped(nx, nz);
    const CheckReport r = check_dpi(DiscreteJoint(p), DiscreteJoint(q));
    if (r.lhs < 0.0) ++violations;
    if (r.discrepancy >= agg.discrepancy) {
      agg.discrepancy = r.discrepancy;
      agg.lhs = r.lhs;
      agg.rhs = r.rhs;
    }
  }
  agg.note = "worst instance shown; DPI violations: " + std::to_string(violations);
  if (violations > 0) agg.discrepancy = kInf;
  agg.decide();
  return agg;
}

CheckReport run_elbo_suite(int instances, int nx, int nz, std::uint64_t seed) {
  if (instances < 1 || nx < 1 || nz < 1) throw ContractError("run_elbo_suite: sizes must be positive");
  const CounterRng rng(seed);
  CheckReport agg;
  agg.name = "elbo_random_instances";
  agg.n = instances;
  agg.tolerance = kExactTol;
  for (int k = 0; k < instances; ++k) {
    const auto s = static_cast<std::uint64_t>(k);
    const Vector mu = dirichlet_rows(rng, s, 0, 1, nx).row(0).transpose();
    const Matrix enc = dirichlet_rows(rng, s, 1, nx, nz);
    const Matrix dec = dirichlet_rows(rng, s, 2, nz, nx);
    const Vector prior = dirichlet_rows(rng, s, 3, 1, nz).row(0).transpose();
    const CheckReport r = check_elbo_decomposition(mu, enc, dec, prior);
    if (r.discrepancy >= agg.discrepancy) {
      agg.discrepancy = r.discrepancy;
      agg.lhs = r.lhs;
      agg.rhs = r.rhs;
    }
  }
  agg.note = "worst instance shown";
  agg.decide();
  return agg;
}

GirsanovResult check_girsanov_reverse(const oracle::DensityOracle& orc, const sde::DriftField& decoder,
                                      const sde::TimeGrid& grid, Eigen::Index n_paths,
                                      std::uint64_t seed) {
  const auto& sched = orc.sde().sched;
  sched.require_positive("check_girsanov_reverse");
  if (decoder.dim() != orc.dim()) throw ShapeError("check_girsanov_reverse: dimension mismatch");
  if (n_paths < 2) throw ContractError("check_girsanov_reverse: need at least 2 paths");
  const int d = orc.dim();
  const sde::DriftField exact = orc.reverse_drift_field();
  const Matrix xT = orc.marginal(grid.horizon()).sample(n_paths, derive_seed(seed, 0x7854));
  const sde::TimeGrid fine = grid.refined();
  std::vector<Matrix> fine_noise = sde::wiener_increments(fine, n_paths, d, derive_seed(seed, 0x6477));
  std::vector<Matrix> coarse_noise = sde::coarsen_increments(fine_noise);

  // Right-endpoint quadratic form, matching the reverse path density.
  auto quadratic = [&](const sde::PathBundle& paths) {
    const sde::TimeGrid& g = paths.grid;
    Vector q = Vector::Zero(n_paths);
    for (int i = 0; i < g.steps(); ++i) {
      const double t = g.t(i + 1);
      const Matrix& x = paths.states[static_cast<std::size_t>(i + 1)];
      q += (g.dt() / (2.0 * sched.g2(t))) * (exact.eval(t, x) - decoder.eval(t, x)).rowwise().squaredNorm();
    }
    return q;
  };

  const sde::PathBundle paths = sde::simulate_reverse(exact, sched, grid, xT, std::move(coarse_noise));
  const Vector direct = sde::path_log_density_reverse(paths, exact, sched) -
                        sde::path_log_density_reverse(paths, decoder, sched);
  const Vector quad = quadratic(paths);
  const Vector mart = direct - quad;
  const sde::PathBundle fine_paths = sde::simulate_reverse(exact, sched, fine, xT, std::move(fine_noise));
  const double quad_fine = mean_of(quadratic(fine_paths));

  GirsanovResult res;
  res.direct = mean_of(direct);
  res.direct_se = se_of(direct);
  res.quadratic = mean_of(quad);
  res.quadratic_se = se_of(quad);
  res.martingale_mean = mean_of(mart);
  res.martingale_se = se_of(mart);
  CheckReport& r = res.report;
  r.name = "girsanov_reverse";
  r.lhs = res.direct;
  r.rhs = res.quadratic;
  r.n = n_paths;
  r.se = std::hypot(res.direct_se, res.quadratic_se);
  r.allowance = std::abs(res.quadratic - quad_fine);
  r.discrepancy = std::abs(r.lhs - r.rhs);
  r.tolerance = 3.0 * r.se + r.allowance;
  r.note = "N=" + std::to_string(grid.steps()) + " and 2N=" + std::to_string(fine.steps()) +
           " on shared Brownian paths; martingale mean " + fmt(res.martingale_mean) + " (se " +
           fmt(res.martingale_se) + ")";
  r.decide();
  if (std::abs(res.martingale_mean) > 3.0 * res.martingale_se + r.allowance) r.pass = false;
  return res;
}

CheckReport check_ibp_identity(const sde::DriftField& field, const oracle::GaussianMixture& p,
                               Eigen::Index n_samples, std::uint64_t seed) {
  if (field.dim() != p.dim()) throw ShapeError("check_ibp_identity: dimension mismatch");
  if (!field.has_divergence()) throw ModeError("check_ibp_identity: field has no divergence");
  if (n_samples < 2) throw ContractError("check_ibp_identity: need at least 2 samples");
  const Matrix x = p.sample(n_samples, seed);
  const Vector sf = (p.score(x).array() * field.eval(0.0, x).array()).rowwise().sum();
  const Vector div = field.divergence(0.0, x);
  const Vector sum = sf + div;
  CheckReport r;
  r.name = "ibp_identity";
  r.lhs = sf.mean();
  r.rhs = -div.mean();
  r.n = n_samples;
  r.se = se_of(sum);
  r.discrepancy = std::abs(sum.mean());
  r.tolerance = 3.0 * r.se;
  r.decide();
  return r;
}

CheckReport run_ibp_suite(int fields, const oracle::GaussianMixture& p, Eigen::Index n_samples,
                          std::uint64_t seed) {
  if (fields < 1) throw ContractError("run_ibp_suite: need at least one field");
  CheckReport agg;
  agg.name = "ibp_random_fields";
  agg.n = n_samples;
  agg.tolerance = 3.0;
  agg.discrepancy = -1.0;
  int failures = 0;
  for (int k = 0; k < fields; ++k) {
    const auto net = random_field_net(p.dim(), derive_seed(seed, 0x6e6574 + static_cast<std::uint64_t>(k)), false);
    const CheckReport r = check_ibp_identity(sde::DriftField::mlp(net), p, n_samples,
                                             derive_seed(seed, static_cast<std::uint64_t>(k)));
    if (!r.pass) ++failures;
    const double z = r.se > 0.0 ? r.discrepancy / r.se : (r.discrepancy > 0.0 ? kInf : 0.0);
    if (z > agg.discrepancy) {
      agg.discrepancy = z;
      agg.lhs = r.lhs;
      agg.rhs = r.rhs;
      agg.se = r.se;
    }
  }
  agg.note = "discrepancy in standard errors, worst of " + std::to_string(fields) +
             " fields; failing fields: " + std::to_string(failures);
  agg.decide();
  return agg;
}

CheckReport check_loss_offset_constant(const oracle::DensityOracle& orc,
                                       const std::vector<sde::DriftField>& decoders,
                                       const oracle::GaussianMixture& prior, const sde::TimeGrid& grid,
                                       Eigen::Index n_paths, std::uint64_t seed) {
  if (decoders.size() < 2) throw ContractError("check_loss_offset_constant: need at least 2 decoders");
  const Matrix x0 = orc.initial().sample(n_paths, derive_seed(seed, 0x7830));
  const sde::DriftField enc = orc.encoder_field();
  Vector diffs(static_cast<Eigen::Index>(decoders.size()));
  double se_sum = 0.0;
  for (std::size_t k = 0; k < decoders.size(); ++k) {
    const auto main = obj::loss_main_oracle(orc, decoders[k], prior, grid, x0, seed);
    const auto impl = obj::loss_implicit(enc, decoders[k], prior, orc.sde().sched, grid, x0, seed);
    const Vector per_path = main.per_path - impl.per_path;
    diffs(static_cast<Eigen::Index>(k)) = per_path.mean();
    se_sum += se_of(per_path);
  }
  const double mean_se = se_sum / static_cast<double>(decoders.size());
  CheckReport r;
  r.name = "loss_offset_constant";
  r.lhs = std::sqrt(se_of(diffs) * se_of(diffs) * static_cast<double>(diffs.size()));
  r.rhs = diffs.mean();
  r.n = n_paths;
  r.se = mean_se;
  r.discrepancy = r.lhs;
  r.tolerance = 3.0 * mean_se;
  r.note = "lhs: SD of the offset over " + std::to_string(decoders.size()) +
           " decoders; rhs: mean offset, which estimates E[log mu]";
  r.decide();
  return r;
}

CheckReport check_pf_ode_marginals(const oracle::DensityOracle& orc, double horizon,
                                   const sampler::SamplerConfig& cfg, double rel_tol) {
  const Matrix x = sampler::sample_ode(orc.encoder_field(), orc.reverse_drift_field(),
                                       orc.marginal(horizon), horizon, cfg);
  const int d = orc.dim();
  const Eigen::Index n = x.rows();
  if (n < 2) throw ContractError("check_pf_ode_marginals: need at least 2 samples");
  const RowVector m = x.colwise().mean();
  const double var = (x.rowwise() - m).squaredNorm() / static_cast<double>(n - 1) / d;
  const double target = orc.initial().covariance().trace() / d;
  const Vector mean_err = m.transpose() - orc.initial().mean();
  CheckReport r;
  r.name = "pf_ode_variance";
  r.lhs = var;
  r.rhs = target;
  r.n = n;
  r.discrepancy = std::abs(var / target - 1.0);
  r.tolerance = rel_tol;
  r.se = std::sqrt(2.0 / static_cast<double>(n));
  r.note = sampler::to_string(cfg.scheme) + " with " + std::to_string(cfg.steps) +
           " steps; discrepancy is relative; max mean error " + fmt(mean_err.cwiseAbs().maxCoeff());
  r.decide();
  return r;
}

CheckReport check_ode_vs_sde(const sde::DriftField& encoder, const sde::DriftField& decoder,
                             const oracle::GaussianMixture& prior, const sde::NoiseSchedule& sched,
                             double horizon, const sampler::SamplerConfig& sde_cfg,
                             const sampler::SamplerConfig& ode_cfg, double threshold) {
  const Matrix a = sampler::sample_ode(encoder, decoder, prior, horizon, ode_cfg);
  const Matrix b = sampler::sample_sde(decoder, prior, sched, horizon, sde_cfg);
  const auto sw = data::sliced_wasserstein2(a, b, 256, derive_seed(sde_cfg.seed, 0x7377));
  CheckReport r;
  r.name = "ode_vs_sde";
  r.lhs = sw.value;
  r.rhs = 0.0;
  r.n = a.rows();
  r.se = sw.se;
  r.discrepancy = sw.value;
  r.tolerance = threshold;
  r.note = "sliced W2 between pf-ode-sb and sde samples";
  r.decide();
  return r;
}

std::vector<CheckReport> run_all(std::uint64_t seed, double perturbation) {
  using oracle::DensityOracle;
  using oracle::Gaussian;
  using oracle::GaussianMixture;
  using oracle::LinearSde;
  using sde::NoiseSchedule;
  std::vector<CheckReport> out;
  out.push_back(run_dpi_suite(1000, 3, 3, derive_seed(seed, 1)));
  out.push_back(run_elbo_suite(200, 4, 3, derive_seed(seed, 2)));

  const auto g = NoiseSchedule::constant(std::numbers::sqrt2);
  const DensityOracle ou(GaussianMixture(Gaussian::standard(2)), LinearSde::ornstein_uhlenbeck(2, 1.0, g));
  const Vector c = perturbation * Vector{{0.6, 0.8}};
  CheckReport gir = check_girsanov_reverse(ou, ou.reverse_drift_field().plus_constant(c), sde::TimeGrid(1.0, 512),
                                           10000, derive_seed(seed, 3))
                        .report;
  gir.note += "; closed form |c|^2 T/(2 g^2) = " + fmt(c.squaredNorm() / 4.0);
  out.push_back(gir);

  const GaussianMixture mix({0.4, 0.6}, {Vector{{-1.0, 0.5}}, Vector{{1.0, -0.5}}},
                            {Matrix{{0.5, 0.1}, {0.1, 0.3}}, Matrix::Identity(2, 2) * 0.4});
  out.push_back(run_ibp_suite(20, mix, 100000, derive_seed(seed, 4)));

  const DensityOracle mix_ou(mix, LinearSde::ornstein_uhlenbeck(2, 1.0, g));
  std::vector<sde::DriftField> decoders;
  for (int k = 0; k < 5; ++k) {
    decoders.push_back(sde::DriftField::mlp(random_field_net(2, derive_seed(seed, 0x100 + static_cast<std::uint64_t>(k)), true)));
  }
  out.push_back(check_loss_offset_constant(mix_ou, decoders, GaussianMixture(Gaussian::standard(2)),
                                           sde::TimeGrid(1.0, 32), 4000, derive_seed(seed, 5)));

  const DensityOracle brown(GaussianMixture(Gaussian{Vector::Zero(1), Matrix::Constant(1, 1, 0.25)}),
                            LinearSde::brownian(1, NoiseSchedule::constant(1.0)));
  sampler::SamplerConfig ode;
  ode.n_samples = 100000;
  ode.steps = 512;
  ode.scheme = sampler::OdeScheme::Rk4;
  ode.seed = derive_seed(seed, 6);
  out.push_back(check_pf_ode_marginals(brown, 1.0, ode, 0.02));

  sampler::SamplerConfig sde_cfg;
  sde_cfg.n_samples = 5000;
  sde_cfg.steps = 256;
  sde_cfg.seed = derive_seed(seed, 7);
  sampler::SamplerConfig ode_cfg = sde_cfg;
  ode_cfg.steps = 128;
  out.push_back(check_ode_vs_sde(brown.encoder_field(), brown.reverse_drift_field(), brown.marginal(1.0),
                                 brown.sde().sched, 1.0, sde_cfg, ode_cfg, 0.10));
  return out;
}

void write_jsonl(std::ostream& out, const std::vector<CheckReport>& reports) {
  for (const auto& r : reports) out << r.to_json() << '\n';
}

void write_summary(std::ostream& out, const std::vector<CheckReport>& reports) {
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %14s %14s %12s %12s %8s  %s\n", "check", "lhs", "rhs",
                "discrepancy", "tolerance", "n", "verdict");
  out << line;
  int passed = 0;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-24s %14s %14s %12s %12s %8lld  %s\n", r.name.c_str(),
                  fmt(r.lhs).c_str(), fmt(r.rhs).c_str(), fmt(r.discrepancy).c_str(),
                  fmt(r.tolerance).c_str(), static_cast<long long>(r.n), r.pass ? "PASS" : "FAIL");
    out << line;
    passed += r.pass ? 1 : 0;
  }
  out << passed << "/" << reports.size() << " checks passed\n";
}

}  // namespace sbvae::verify
