// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/objectives/losses.hpp"

#include "sbvae/random.hpp"
#include "sbvae/sde/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace sbvae::obj {
namespace {

using ad::Tape;
using ad::Var;

double standard_error(const Vector& v) {
  const auto n = v.size();
  if (n < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(n - 1) /
                   static_cast<double>(n));
}

LossBreakdown finish(const Vector& prior, const Vector& drift, int n_steps) {
  LossBreakdown out;
  out.prior_term = prior.mean();
  out.drift_term = drift.mean();
  out.total = out.prior_term + out.drift_term;
  out.n_paths = prior.size();
  out.n_steps = n_steps;
  out.per_path = prior + drift;
  out.se = standard_error(out.per_path);
  return out;
}

void require_noise(const sde::NoiseSchedule& sched, const char* who) {
  if (sched.degenerate()) {
    throw DegenerateError(std::string(who) + ": g vanishes on [0, T]; the g^-2 weighting is undefined");
  }
}

void check_finite_rows(const Matrix& values, Eigen::Index first_path, int step, const char* who) {
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    if (!std::isfinite(values(r, 0))) {
      throw NumericError(std::string(who) + ": non-finite loss term at path " +
                         std::to_string(first_path + r) + ", step " + std::to_string(step));
    }
  }
}

void check_state(const Matrix& x, Eigen::Index first_path, int step) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double norm = x.row(r).norm();
    if (!std::isfinite(norm) || norm > sde::kBlowUpNorm) {
      throw DivergenceError("loss path diverged: path " + std::to_string(first_path + r) +
                                " at step " + std::to_string(step),
                            first_path + r, step);
    }
  }
}

ad::DivergenceOptions chunk_divergence(const ad::DivergenceOptions& base, Eigen::Index chunk) {
  ad::DivergenceOptions o = base;
  o.seed = derive_seed(base.seed, static_cast<std::uint64_t>(chunk));
  return o;
}

}  // namespace

std::string to_string(ModelMode m) {
  switch (m) {
    case ModelMode::FullSb:
      return "full-sb";
    case ModelMode::Sbm:
      return "sbm";
    case ModelMode::ShiftedSb:
      return "shifted-sb";
  }
  return "?";
}

ModelMode mode_from_string(const std::string& s) {
  if (s == "full-sb") return ModelMode::FullSb;
  if (s == "sbm") return ModelMode::Sbm;
  if (s == "shifted-sb") return ModelMode::ShiftedSb;
  throw ConfigError("unknown mode '" + s + "' (expected full-sb, sbm or shifted-sb)");
}

void ParameterGradients::track(const sde::DriftField& field) {
  for (const ad::Mlp* net : field.networks()) {
    if (tracks(*net)) continue;
    nets_.push_back(net);
    grads_.emplace_back(net->parameters().count(), 0.0);
  }
}

bool ParameterGradients::tracks(const ad::Mlp& net) const {
  return std::find(nets_.begin(), nets_.end(), &net) != nets_.end();
}

std::vector<double>& ParameterGradients::of(const ad::Mlp& net) {
  const auto it = std::find(nets_.begin(), nets_.end(), &net);
  if (it == nets_.end()) throw ContractError("gradient requested for an untracked network");
  return grads_[static_cast<std::size_t>(it - nets_.begin())];
}

const std::vector<double>& ParameterGradients::of(const ad::Mlp& net) const {
  return const_cast<ParameterGradients*>(this)->of(net);
}

void ParameterGradients::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

LossBreakdown loss_main_oracle(const oracle::DensityOracle& orc, const sde::DriftField& decoder,
                               const oracle::GaussianMixture& prior, const sde::TimeGrid& grid,
                               const Matrix& x0, std::uint64_t seed) {
  const auto& sched = orc.sde().sched;
  require_noise(sched, "loss_main_oracle");
  if (decoder.dim() != orc.dim() || prior.dim() != orc.dim() || x0.cols() != orc.dim()) {
    throw ShapeError("loss_main_oracle: dimension mismatch");
  }
  const sde::PathBundle paths = sde::simulate_forward(orc.encoder_field(), sched, grid, x0, seed);
  const double dt = grid.dt();
  Vector drift = Vector::Zero(x0.rows());
  for (int i = 0; i < grid.steps(); ++i) {
    const double t = grid.t(i);
    const Matrix& x = paths.states[static_cast<std::size_t>(i)];
    drift += (dt / (2.0 * sched.g2(t))) *
             (orc.reverse_drift(t, x) - decoder.eval(t, x)).rowwise().squaredNorm();
  }
  const auto pT = orc.marginal(grid.horizon());
  Vector prior_term(x0.rows());
  if (pT.is_gaussian() && prior.is_gaussian()) {
    prior_term.setConstant(oracle::kl_gaussian(pT.component(0), prior.component(0)));
  } else {
    const Matrix& xT = paths.states.back();
    prior_term = pT.log_pdf(xT) - prior.log_pdf(xT);
  }
  return finish(prior_term, drift, grid.steps());
}

LossBreakdown loss_main_oracle(const oracle::DensityOracle& orc, const sde::DriftField& decoder,
                               const oracle::GaussianMixture& prior, const sde::TimeGrid& grid,
                               Eigen::Index n_paths, std::uint64_t seed) {
  const Matrix x0 = orc.initial().sample(n_paths, derive_seed(seed, 0x7830));
  return loss_main_oracle(orc, decoder, prior, grid, x0, seed);
}

LossBreakdown loss_main_oracle(const sde::DriftField& encoder, const oracle::GaussianMixture& data,
                               const sde::DriftField& decoder, const oracle::GaussianMixture& prior,
                               const sde::NoiseSchedule& sched, const sde::TimeGrid& grid,
                               Eigen::Index n_paths, std::uint64_t seed) {
  return loss_main_oracle(oracle::oracle_for(encoder, data, sched), decoder, prior, grid, n_paths,
                          seed);
}

LossBreakdown loss_implicit(const sde::DriftField& encoder, const sde::DriftField& decoder,
                            const oracle::GaussianMixture& prior, const sde::NoiseSchedule& sched,
                            const sde::TimeGrid& grid, const Matrix& data, std::uint64_t seed,
                            const ImplicitOptions& opts, ParameterGradients* grads) {
  require_noise(sched, "loss_implicit");
  const int d = encoder.dim();
  if (decoder.dim() != d || prior.dim() != d || data.cols() != d) {
    throw ShapeError("loss_implicit: dimension mismatch");
  }
  if (data.rows() == 0) throw ContractError("loss_implicit: empty data batch");
  if (opts.chunk < 1) throw ContractError("loss_implicit: chunk must be >= 1");
  if (opts.mode == ModelMode::Sbm && grads != nullptr && opts.grad_encoder &&
      !encoder.networks().empty()) {
    throw ModeError("loss_implicit: sbm mode keeps the encoder fixed; it must not contain networks");
  }
  const bool enc_grad = grads != nullptr && opts.grad_encoder && opts.mode != ModelMode::Sbm &&
                        !encoder.networks().empty();
  const bool dec_grad = grads != nullptr && opts.grad_decoder && !decoder.networks().empty();
  if (grads != nullptr) {
    if (enc_grad) grads->track(encoder);
    if (dec_grad) grads->track(decoder);
  }

  const Eigen::Index n = data.rows();
  const int steps = grid.steps();
  const double dt = grid.dt();
  const std::vector<Matrix> noise = sde::wiener_increments(grid, n, d, seed);
  Vector prior_part(n), drift_part(n);

  for (Eigen::Index r0 = 0, chunk = 0; r0 < n; r0 += opts.chunk, ++chunk) {
    const Eigen::Index len = std::min(opts.chunk, n - r0);
    const ad::DivergenceOptions dopts = chunk_divergence(opts.divergence, chunk);

    if (!enc_grad && !dec_grad) {
      Matrix x = data.middleRows(r0, len);
      Vector acc = Vector::Zero(len);
      for (int i = 0; i < steps; ++i) {
        const double t = grid.t(i);
        const double g2 = sched.g2(t);
        const Matrix u = encoder.eval(t, x);
        const Matrix term = (dt / (2.0 * g2)) * (u - decoder.eval(t, x)).rowwise().squaredNorm() -
                            dt * decoder.divergence(t, x, dopts, static_cast<std::uint32_t>(i));
        check_finite_rows(term, r0, i, "loss_implicit");
        acc += term;
        x += u * dt + sched(t) * noise[static_cast<std::size_t>(i)].middleRows(r0, len);
        check_state(x, r0, i + 1);
      }
      prior_part.segment(r0, len) = -prior.log_pdf(x);
      drift_part.segment(r0, len) = acc;
      check_finite_rows(prior_part.segment(r0, len), r0, steps, "loss_implicit");
      continue;
    }

    Tape tape;
    const sde::TapedDrift te(encoder, tape);
    const sde::TapedDrift td(decoder, tape);
    Var x = tape.constant(data.middleRows(r0, len));
    Var acc;
    for (int i = 0; i < steps; ++i) {
      const double t = grid.t(i);
      const double g2 = sched.g2(t);
      const Var u = enc_grad ? te.eval(t, x) : tape.constant(encoder.eval(t, tape.value(x)));
      const auto s = td.eval_with_divergence(t, x, dopts, static_cast<std::uint32_t>(i));
      const Var term = (dt / (2.0 * g2)) * ad::row_sum(ad::square(u - s.out)) + (-dt) * s.divergence;
      check_finite_rows(tape.value(term), r0, i, "loss_implicit");
      acc = i == 0 ? term : acc + term;
      x = x + dt * u + tape.constant(sched(t) * noise[static_cast<std::size_t>(i)].middleRows(r0, len));
      check_state(tape.value(x), r0, i + 1);
    }
    const Matrix xT = tape.value(x);
    const Vector lp = prior.log_pdf(xT);
    check_finite_rows(lp, r0, steps, "loss_implicit");
    const Var ce = ad::row_local(x, -lp, -prior.score(xT));
    prior_part.segment(r0, len) = -lp;
    drift_part.segment(r0, len) = tape.value(acc);
    tape.backward(ad::sum((1.0 / static_cast<double>(n)) * (acc + ce)));
    for (const ad::Mlp* net : grads->networks()) {
      if (enc_grad) te.accumulate_gradient(*net, grads->of(*net));
      if (dec_grad) td.accumulate_gradient(*net, grads->of(*net));
    }
  }
  return finish(prior_part, drift_part, steps);
}

LossBreakdown loss_esm(const sde::DriftField& score_net, const oracle::DensityOracle& orc,
                       const sde::TimeGrid& grid, Eigen::Index n_paths, std::uint64_t seed) {
  if (score_net.dim() != orc.dim()) throw ShapeError("loss_esm: dimension mismatch");
  const auto& sched = orc.sde().sched;
  const Matrix x0 = orc.initial().sample(n_paths, derive_seed(seed, 0x7830));
  const sde::PathBundle paths = sde::simulate_forward(orc.encoder_field(), sched, grid, x0, seed);
  Vector acc = Vector::Zero(n_paths);
  for (int i = 0; i < grid.steps(); ++i) {
    const double t = grid.t(i);
    const Matrix& x = paths.states[static_cast<std::size_t>(i)];
    acc += (0.5 * grid.dt() * sched.g2(t)) *
           (score_net.eval(t, x) - orc.score(t, x)).rowwise().squaredNorm();
  }
  return finish(Vector::Zero(n_paths), acc, grid.steps());
}

LossBreakdown loss_dsm(const sde::DriftField& score_net, const oracle::LinearSde& sde,
                       const Matrix& data, const sde::TimeGrid& grid, std::uint64_t seed,
                       ParameterGradients* grads) {
  const int d = sde.dim();
  if (score_net.dim() != d || data.cols() != d) throw ShapeError("loss_dsm: dimension mismatch");
  const Eigen::Index n = data.rows();
  if (n == 0) throw ContractError("loss_dsm: empty data batch");
  const int steps = grid.steps();
  const CounterRng rng(seed);

  // Knot per sample, then group rows by knot so each network call has one t.
  std::vector<std::vector<Eigen::Index>> by_knot(static_cast<std::size_t>(steps + 1));
  Matrix z(n, d);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto stream = static_cast<std::uint64_t>(j);
    const int k = 1 + std::min(steps - 1, static_cast<int>(rng.uniform(stream, 0, 0) * steps));
    by_knot[static_cast<std::size_t>(k)].push_back(j);
    for (int c = 0; c < d; ++c) z(j, c) = rng.normal(stream, 1, static_cast<std::uint32_t>(c));
  }

  const bool with_grad = grads != nullptr && !score_net.networks().empty();
  if (with_grad) grads->track(score_net);
  Tape tape;
  std::optional<sde::TapedDrift> taped;
  if (with_grad) taped.emplace(score_net, tape);
  Var root;
  Vector per(n);
  for (int k = 1; k <= steps; ++k) {
    const auto& rows = by_knot[static_cast<std::size_t>(k)];
    if (rows.empty()) continue;
    const double t = grid.t(k);
    const auto kernel = sde.transition_kernel(0.0, t);
    const Eigen::LLT<Matrix> llt(kernel.cov);
    if (llt.info() != Eigen::Success) {
      throw DegenerateError("loss_dsm: transition covariance at t = " + std::to_string(t) +
                            " is not positive definite");
    }
    const Matrix L = llt.matrixL();
    const auto m = static_cast<Eigen::Index>(rows.size());
    Matrix x0(m, d), zk(m, d);
    for (Eigen::Index r = 0; r < m; ++r) {
      x0.row(r) = data.row(rows[static_cast<std::size_t>(r)]);
      zk.row(r) = z.row(rows[static_cast<std::size_t>(r)]);
    }
    const Matrix xt = ((x0 * kernel.M.transpose()).rowwise() + kernel.m.transpose()) + zk * L.transpose();
    // -cov^{-1} (L z) = -L^{-T} z, one row per sample.
    const Matrix target = -L.transpose().triangularView<Eigen::Upper>().solve(zk.transpose()).transpose();
    const double w = 0.5 * grid.horizon() * sde.sched.g2(t);
    Vector vals;
    if (with_grad) {
      const Var diff = taped->eval(t, tape.constant(xt)) - tape.constant(target);
      const Var rs = w * ad::row_sum(ad::square(diff));
      vals = tape.value(rs);
      const Var part = ad::sum(rs);
      root = root.valid() ? root + part : part;
    } else {
      vals = w * (score_net.eval(t, xt) - target).rowwise().squaredNorm();
    }
    for (Eigen::Index r = 0; r < m; ++r) per(rows[static_cast<std::size_t>(r)]) = vals(r);
  }
  if (with_grad) {
    tape.backward((1.0 / static_cast<double>(n)) * root);
    for (const ad::Mlp* net : grads->networks()) taped->accumulate_gradient(*net, grads->of(*net));
  }
  return finish(Vector::Zero(n), per, steps);
}

data::MetricResult prior_loss_estimate(const Matrix& samples, const oracle::GaussianMixture& prior,
                                       PriorLossMethod method, std::uint64_t seed) {
  if (samples.cols() != prior.dim()) throw ShapeError("prior_loss_estimate: dimension mismatch");
  if (samples.rows() < 100) throw ContractError("prior_loss_estimate: need at least 100 samples");
  std::string note;
  if (method == PriorLossMethod::MomentMatched && !prior.is_gaussian()) {
    note = "mixture prior: moment-matched estimate unavailable, fell back to knn";
    warn("prior_loss_estimate: " + note);
    method = PriorLossMethod::Knn;
  }
  if (method == PriorLossMethod::Knn) {
    const Matrix ref = prior.sample(samples.rows(), derive_seed(seed, 0x6b6e6e));
    auto r = data::knn_kl(samples, ref, 5, seed);
    r.name = "prior_loss_knn";
    if (!note.empty()) r.note = note;
    return r;
  }
  const Vector mean = samples.colwise().mean().transpose();
  const Matrix c = samples.rowwise() - mean.transpose();
  const Matrix cov = c.transpose() * c / static_cast<double>(samples.rows() - 1);
  return {"prior_loss_moment_matched", oracle::kl_gaussian({mean, cov}, prior.component(0)),
          samples.rows(), 0.0, note};
}

data::MetricResult prior_cross_entropy(const Matrix& samples, const oracle::GaussianMixture& prior) {
  const Vector v = -prior.log_pdf(samples);
  return {"prior_cross_entropy", v.mean(), v.size(), standard_error(v), ""};
}

}  // namespace sbvae::obj
