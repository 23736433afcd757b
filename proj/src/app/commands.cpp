// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/app/commands.hpp"

#include "sbvae/data/metrics.hpp"
#include "sbvae/random.hpp"
#include "sbvae/sde/simulate.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sbvae::app {
namespace fs = std::filesystem;
namespace {

using nlohmann::json;

void emit(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string loss_row(long step, const obj::LossBreakdown& l) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", step, l.prior_term, l.drift_term, l.total, l.se);
  return buf;
}

json metric(const data::MetricResult& m) {
  json j = {{"value", m.value}, {"se", m.se}, {"n", m.n}};
  if (!m.note.empty()) j["note"] = m.note;
  return j;
}

Matrix draw_batch(const Matrix& train, int batch, long step, std::uint64_t seed) {
  const CounterRng rng(seed);
  const Eigen::Index n = train.rows();
  Matrix out(batch, train.cols());
  for (int i = 0; i < batch; ++i) {
    auto idx = static_cast<Eigen::Index>(rng.uniform(static_cast<std::uint64_t>(step), 0, static_cast<std::uint32_t>(i)) *
                                         static_cast<double>(n));
    out.row(i) = train.row(std::min(idx, n - 1));
  }
  return out;
}

struct Optimizers {
  ad::AdamState enc, dec;
};

// One loss evaluation at the current parameters; fills grads when given.
obj::LossBreakdown step_loss(const Model& m, const ExperimentConfig& cfg, const Matrix& batch, std::uint64_t seed,
                             bool grad_enc, bool grad_dec, obj::ParameterGradients* grads) {
  const auto grid = cfg.grid();
  if (m.mode == obj::ModelMode::Sbm) {
    const auto& A = m.base.linear_matrix();
    const oracle::LinearSde sde{A, m.base.linear_offset(), m.sched};
    return obj::loss_dsm(m.score(), sde, batch, grid, seed, grads);
  }
  obj::ImplicitOptions o = cfg.implicit_options();
  o.grad_encoder = grad_enc;
  o.grad_decoder = grad_dec;
  return obj::loss_implicit(m.encoder(), m.decoder(), cfg.prior_law(), m.sched, grid, batch, seed, o, grads);
}

}  // namespace

fs::path resolve_output_dir(const std::string& explicit_dir, const ExperimentConfig& cfg, const std::string& command) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const std::string leaf = command + "-" + cfg.hash().substr(0, 12);
  if (const char* root = std::getenv("SBVAE_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    return fs::path(root) / leaf;
  }
  return fs::path("runs") / leaf;
}

void write_run_files(const fs::path& dir, const ExperimentConfig& cfg, const std::string& command,
                     double wall_seconds, const std::vector<std::string>& files) {
  write_text(dir / "config.json", cfg.to_json() + "\n");
  const auto s = PhaseSeeds::from(cfg.seed);
  json m;
  m["command"] = command;
  m["config_hash"] = cfg.hash();
  m["version"] = kVersion;
  m["wall_clock_seconds"] = wall_seconds;
  m["seeds"] = {{"master", cfg.seed},       {"data", hex(s.data)},        {"holdout", hex(s.holdout)},
                {"init_encoder", hex(s.init_encoder)}, {"init_decoder", hex(s.init_decoder)},
                {"batches", hex(s.batches)}, {"train", hex(s.train)},      {"sample", hex(s.sample)},
                {"eval", hex(s.eval)}};
  std::vector<std::string> all{"config.json", "manifest.json"};
  all.insert(all.end(), files.begin(), files.end());
  m["files"] = all;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

data::Dataset training_data(const ExperimentConfig& cfg) {
  if (!cfg.data.file.empty()) {
    data::Dataset d = data::load_dataset(cfg.data.file, cfg.dataset.standardize);
    if (d.dim() != cfg.dataset.dim) {
      throw ConfigError("data file '" + cfg.data.file + "' has dimension " + std::to_string(d.dim()) +
                        " but dataset.dim is " + std::to_string(cfg.dataset.dim));
    }
    return d;
  }
  return data::generate(cfg.dataset, cfg.data.n_train, PhaseSeeds::from(cfg.seed).data);
}

Matrix holdout_data(const ExperimentConfig& cfg, const data::Standardization& transform, Eigen::Index n) {
  if (!cfg.data.file.empty()) {
    throw ConfigError("no generator for a file dataset; pass reference samples explicitly");
  }
  const data::Dataset h = data::generate(cfg.dataset, n, PhaseSeeds::from(cfg.seed).holdout);
  return transform.apply(h.transform.invert(h.samples));
}

TrainResult train(const ExperimentConfig& cfg, const fs::path& dir, const Log& log) {
  cfg.validate();
  if (cfg.oracle) throw ConfigError("oracle mode has nothing to train");
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(dir / "checkpoints");
  const auto seeds = PhaseSeeds::from(cfg.seed);
  const data::Dataset train_set = training_data(cfg);
  Model m = make_model(cfg, train_set.transform);
  const ad::AdamConfig adam = cfg.adam();
  Optimizers opt{ad::AdamState::zeros(m.encoder_net ? m.encoder_net->parameters().count() : 0),
                 ad::AdamState::zeros(m.decoder_net->parameters().count())};
  std::vector<std::string> files{"loss.csv"};
  std::ofstream loss(dir / "loss.csv", std::ios::binary);
  if (!loss) throw IoError("cannot write '" + (dir / "loss.csv").string() + "'");
  loss << "step,prior_term,drift_term,total,se\n";

  TrainResult res;
  const int steps = cfg.optimizer.steps;
  Model good = m;  // parameters before the step in progress
  auto snapshot = [&]() {
    good = m;
    if (m.encoder_net) good.encoder_net = std::make_shared<ad::Mlp>(*m.encoder_net);
    good.decoder_net = std::make_shared<ad::Mlp>(*m.decoder_net);
  };
  snapshot();
  for (long k = 0; k <= steps; ++k) {
    m.step = k;
    const Matrix batch = draw_batch(train_set.samples, cfg.optimizer.batch, k, seeds.batches);
    const std::uint64_t seed = derive_seed(seeds.train, static_cast<std::uint64_t>(k));
    bool grad_enc = m.encoder_net != nullptr, grad_dec = true;
    if (cfg.optimizer.alternating && m.encoder_net) {
      const bool decoder_phase = (k / cfg.optimizer.alternate_every) % 2 == 0;
      grad_enc = !decoder_phase;
      grad_dec = decoder_phase;
    }
    try {
      obj::ParameterGradients grads;
      const bool update = k < steps;
      const auto l = step_loss(m, cfg, batch, seed, grad_enc, grad_dec, update ? &grads : nullptr);
      if (!std::isfinite(l.total)) throw NumericError("non-finite loss at step " + std::to_string(k));
      loss << loss_row(k, l);
      res.last = l;
      if (update) {
        if (grad_enc && grads.tracks(*m.encoder_net)) {
          ad::adam_step(m.encoder_net->parameters(), grads.of(*m.encoder_net), opt.enc, adam);
        }
        if (grad_dec && grads.tracks(*m.decoder_net)) {
          ad::adam_step(m.decoder_net->parameters(), grads.of(*m.decoder_net), opt.dec, adam);
        }
        res.steps_done = k + 1;
        m.step = k + 1;
        snapshot();
        const int every = cfg.optimizer.checkpoint_every;
        if (every > 0 && (k + 1) % every == 0) {
          char name[40];
          std::snprintf(name, sizeof name, "step_%08ld.ckpt", k + 1);
          save_model(dir / "checkpoints" / name, m);
          files.push_back(std::string("checkpoints/") + name);
        }
      }
      if (k % 100 == 0 || k == steps) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "step %ld  total %.5f  prior %.5f  drift %.5f", k, l.total, l.prior_term,
                      l.drift_term);
        emit(log, buf);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric && e.kind() != ErrorKind::Divergence) throw;
      res.aborted = true;
      res.message = std::string("training aborted at step ") + std::to_string(k) + ": " + e.what() +
                    "; model.ckpt keeps the parameters after step " + std::to_string(res.steps_done);
      emit(log, res.message);
      break;
    }
  }
  loss.close();
  save_model(dir / "model.ckpt", good);
  files.push_back("model.ckpt");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_files(dir, cfg, "train", wall, files);
  return res;
}

ExperimentConfig load_run_config(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("run directory '" + dir.string() + "' does not exist");
  return ExperimentConfig::load(dir / "config.json");
}

Model load_run_model(const fs::path& dir, const std::string& checkpoint) {
  const ExperimentConfig cfg = load_run_config(dir);
  if (cfg.oracle) return make_model(cfg, data::Standardization::identity(cfg.dataset.dim));
  const fs::path ck = checkpoint.empty() ? dir / "model.ckpt" : fs::path(checkpoint);
  return load_model(ck, cfg);
}

Matrix generate_samples(const Model& m, const ExperimentConfig& cfg, const sampler::SamplerConfig& sc) {
  const auto prior = cfg.prior_law();
  const double T = cfg.schedule.horizon;
  switch (sc.method) {
    case sampler::Method::Sde:
      return sampler::sample_sde(m.decoder(), prior, m.sched, T, sc);
    case sampler::Method::PfOdeSb:
      return sampler::sample_ode(m.encoder(), m.decoder(), prior, T, sc);
    case sampler::Method::PfOdeSbm:
      return sampler::sample_ode_sbm(m.base, m.score(), m.sched, prior, T, sc);
  }
  throw ContractError("unknown sampler method");
}

void write_svg_scatter(const fs::path& path, const Matrix& x, const Matrix* reference) {
  if (x.cols() != 2 || (reference != nullptr && reference->cols() != 2)) {
    throw ShapeError("SVG scatter needs 2-D points");
  }
  double lo = -3.0, hi = 3.0;
  auto widen = [&](const Matrix& p) {
    if (p.size() == 0) return;
    lo = std::min(lo, p.minCoeff());
    hi = std::max(hi, p.maxCoeff());
  };
  widen(x);
  if (reference != nullptr) widen(*reference);
  const double size = 480.0, pad = 10.0;
  auto px = [&](double v) { return pad + (v - lo) / (hi - lo) * (size - 2 * pad); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[128];
  auto dots = [&](const Matrix& p, const char* color) {
    out << "<g fill=\"" << color << "\" fill-opacity=\"0.5\">\n";
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.5\"/>\n", px(p(r, 0)),
                    size - px(p(r, 1)));
      out << buf;
    }
    out << "</g>\n";
  };
  if (reference != nullptr) dots(*reference, "#999999");
  dots(x, "#1f5fa8");
  out << "</svg>\n";
  write_text(path, out.str());
}

EvalResult evaluate(const Matrix& samples, const Matrix& reference, const ExperimentConfig& cfg, const Model* model,
                    const EvalOptions& opts) {
  if (samples.cols() != reference.cols()) {
    throw ShapeError("samples have dimension " + std::to_string(samples.cols()) + " but the reference has " +
                     std::to_string(reference.cols()));
  }
  if (samples.rows() < 2 || reference.rows() < 2) throw ContractError("eval needs at least 2 samples on each side");
  const auto seeds = PhaseSeeds::from(cfg.seed);
  json j;
  j["n_samples"] = samples.rows();
  j["n_reference"] = reference.rows();
  EvalResult res;
  auto gate = [&](const char* name, double value, const std::optional<double>& limit) {
    if (!limit) return;
    j["thresholds"][name] = *limit;
    if (!(value <= *limit)) res.pass = false;
  };
  const auto sw = data::sliced_wasserstein2(samples, reference, cfg.eval.projections, derive_seed(seeds.eval, 1));
  j["sliced_w2"] = metric(sw);
  gate("sliced_w2", sw.value, opts.max_sliced_w2);
  if (samples.rows() > cfg.eval.knn_k && reference.rows() > cfg.eval.knn_k) {
    const auto kl = data::knn_kl(samples, reference, cfg.eval.knn_k, derive_seed(seeds.eval, 2));
    j["knn_kl"] = metric(kl);
    gate("knn_kl", kl.value, opts.max_knn_kl);
  }
  if (model != nullptr) {
    const auto law = cfg.data.file.empty() ? data::standardized_law(cfg.dataset) : std::nullopt;
    if (law && model->mode != obj::ModelMode::FullSb && !model->oracle) {
      const auto orc = oracle::oracle_for(model->base, *law, model->sched);
      const auto mse = data::score_mse(model->score(), orc, cfg.grid(), cfg.eval.score_points,
                                       derive_seed(seeds.eval, 3));
      j["score_mse"] = metric(mse);
      gate("score_mse", mse.value, opts.max_score_mse);
    }
    if (!model->oracle && model->mode != obj::ModelMode::Sbm) {
      // -E log pi(x_T) along encoder paths from the reference, against the
      // same quantity for exact prior draws.
      const auto prior = cfg.prior_law();
      const auto paths = sde::simulate_forward(model->encoder(), model->sched, cfg.grid(), reference,
                                               derive_seed(seeds.eval, 4));
      const auto model_ce = obj::prior_cross_entropy(paths.states.back(), prior);
      const auto exact_ce = obj::prior_cross_entropy(prior.sample(reference.rows(), derive_seed(seeds.eval, 5)), prior);
      const double gap = std::abs(model_ce.value - exact_ce.value);
      j["prior_cross_entropy"] = {{"model", metric(model_ce)}, {"exact_prior", metric(exact_ce)}, {"gap", gap}};
      gate("prior_gap", gap, opts.max_prior_gap);
    }
  }
  j["pass"] = res.pass;
  res.json = j.dump(2) + "\n";
  return res;
}

std::vector<verify::CheckReport> verify_suite(const VerifyOptions& opts) {
  if (!(opts.perturbation >= 0.0)) throw ConfigError("perturbation norm must be >= 0");
  return verify::run_all(opts.seed, opts.perturbation);
}

}  // namespace sbvae::app
