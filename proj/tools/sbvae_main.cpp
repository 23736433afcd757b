// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/sbvae.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

int exit_code(sbvae_status s) {
  switch (s) {
    case SBVAE_OK:
      return kExitOk;
    case SBVAE_ERR_CONFIG:
    case SBVAE_ERR_IO:
    case SBVAE_ERR_SHAPE:
    case SBVAE_ERR_MODE:
    case SBVAE_ERR_CONTRACT:
      return kExitUsage;
    default:
      return kExitFailed;
  }
}

int report(sbvae_status s) {
  if (s != SBVAE_OK) std::cerr << "sbvae: " << sbvae_status_name(s) << ": " << sbvae_last_error() << '\n';
  return exit_code(s);
}

struct ConfigDeleter {
  void operator()(sbvae_config* c) const { sbvae_config_free(c); }
};
struct ModelDeleter {
  void operator()(sbvae_model* m) const { sbvae_model_free(m); }
};
using ConfigPtr = std::unique_ptr<sbvae_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<sbvae_model, ModelDeleter>;

// Config from --config (or defaults) with --set overrides applied in order.
sbvae_status build_config(const std::string& path, const std::vector<std::string>& sets, ConfigPtr& out) {
  sbvae_config* raw = nullptr;
  sbvae_status s = path.empty() ? sbvae_config_new(&raw) : sbvae_config_load(path.c_str(), &raw);
  if (s != SBVAE_OK) return s;
  out.reset(raw);
  for (const auto& kv : sets) {
    if ((s = sbvae_config_set(out.get(), kv.c_str())) != SBVAE_OK) return s;
  }
  return SBVAE_OK;
}

std::string output_dir(const sbvae_config* cfg, const std::string& explicit_dir, const char* command) {
  size_t needed = 0;
  if (sbvae_output_dir(cfg, explicit_dir.c_str(), command, nullptr, 0, &needed) != SBVAE_OK) return {};
  std::string buf(needed, '\0');
  sbvae_output_dir(cfg, explicit_dir.c_str(), command, buf.data(), buf.size(), &needed);
  buf.resize(needed - 1);
  return buf;
}

void print_line(const char* line, void*) { std::cout << line << '\n' << std::flush; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schrodinger-bridge variational autoencoder toolkit"};
  app.set_version_flag("--version", std::string(sbvae_version()));
  app.require_subcommand(1);

  std::string config_path, out_dir, run_dir, checkpoint;
  std::vector<std::string> sets;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override a config leaf, e.g. optimizer.lr=1e-3")->take_all();
    sub->add_option("-o,--out", out_dir, "output directory");
  };

  auto* verify = app.add_subcommand("verify", "run the identity checks");
  add_config(verify);
  std::optional<std::uint64_t> verify_seed;
  double perturbation = 0.5;
  verify->add_option("--seed", verify_seed, "master seed (default: config seed)");
  verify->add_option("--perturb", perturbation, "norm of the constant decoder perturbation")->check(CLI::NonNegativeNumber);

  auto* train = app.add_subcommand("train", "train a model");
  add_config(train);

  auto* sample = app.add_subcommand("sample", "draw samples from a trained or oracle model");
  add_config(sample);
  sample->add_option("-r,--run", run_dir, "run directory written by train")->check(CLI::ExistingDirectory);
  sample->add_option("--checkpoint", checkpoint, "checkpoint file (default: <run>/model.ckpt)")->check(CLI::ExistingFile);
  std::string method, scheme;
  std::optional<std::int64_t> n_samples;
  int steps = 0;
  std::optional<std::uint64_t> sample_seed;
  bool raw_units = false, svg = false;
  sample->add_option("-m,--method", method, "sde | pf-ode-sb | pf-ode-sbm");
  sample->add_option("--scheme", scheme, "heun | rk4");
  sample->add_option("-n,--samples", n_samples, "number of samples")->check(CLI::NonNegativeNumber);
  sample->add_option("--steps", steps, "integration steps")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sample_seed, "sampler seed");
  sample->add_flag("--raw", raw_units, "undo the data standardization");
  sample->add_flag("--svg", svg, "also write samples.svg (2-D only)");

  auto* eval = app.add_subcommand("eval", "score samples against reference data");
  add_config(eval);
  eval->add_option("-r,--run", run_dir, "run directory written by train")->check(CLI::ExistingDirectory);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default: <run>/model.ckpt)")->check(CLI::ExistingFile);
  std::string samples_csv, reference_csv;
  eval->add_option("--samples", samples_csv, "samples CSV (default: draw from the model)")->check(CLI::ExistingFile);
  eval->add_option("--reference", reference_csv, "reference CSV (default: held-out generator draws)")
      ->check(CLI::ExistingFile);
  std::optional<double> max_sw2, max_kl, max_mse, max_gap;
  eval->add_option("--max-sw2", max_sw2, "fail when sliced W2 exceeds this");
  eval->add_option("--max-knn-kl", max_kl, "fail when the knn KL estimate exceeds this");
  eval->add_option("--max-score-mse", max_mse, "fail when score_mse exceeds this");
  eval->add_option("--max-prior-gap", max_gap, "fail when the prior cross-entropy gap exceeds this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  sbvae_set_message_handler(print_line, nullptr);

  ConfigPtr cfg;
  if (verify->parsed()) {
    if (sbvae_status s = build_config(config_path, sets, cfg); s != SBVAE_OK) return report(s);
    const std::string dir = output_dir(cfg.get(), out_dir, "verify");
    const std::uint64_t seed = verify_seed.value_or(sbvae_config_seed(cfg.get()));
    const sbvae_status s = sbvae_verify(seed, perturbation, dir.c_str());
    if (s == SBVAE_OK || s == SBVAE_CHECK_FAILED) std::cout << "reports: " << dir << "/reports.jsonl\n";
    return report(s);
  }

  if (train->parsed()) {
    if (sbvae_status s = build_config(config_path, sets, cfg); s != SBVAE_OK) return report(s);
    const std::string dir = output_dir(cfg.get(), out_dir, "train");
    std::cout << "run directory: " << dir << '\n';
    return report(sbvae_train(cfg.get(), dir.c_str()));
  }

  // sample and eval: a model from --run, or from --config (oracle or init).
  auto* sub = sample->parsed() ? sample : eval;
  ModelPtr model;
  const bool want_model = !run_dir.empty() || sample->parsed() || samples_csv.empty();
  if (!run_dir.empty()) {
    if (!config_path.empty() || !sets.empty()) {
      std::cerr << "sbvae: --run takes its config from the run directory; drop --config/--set\n";
      return kExitUsage;
    }
    sbvae_model* raw = nullptr;
    if (sbvae_status s = sbvae_model_load(run_dir.c_str(), checkpoint.empty() ? nullptr : checkpoint.c_str(), &raw);
        s != SBVAE_OK) {
      return report(s);
    }
    model.reset(raw);
  } else {
    if (!checkpoint.empty()) {
      std::cerr << "sbvae: --checkpoint needs --run\n";
      return kExitUsage;
    }
    if (sbvae_status s = build_config(config_path, sets, cfg); s != SBVAE_OK) return report(s);
    if (want_model) {
      sbvae_model* raw = nullptr;
      if (sbvae_status s = sbvae_model_from_config(cfg.get(), &raw); s != SBVAE_OK) return report(s);
      model.reset(raw);
    }
  }
  const sbvae_config* active = model ? sbvae_model_config(model.get()) : cfg.get();
  std::string dir = out_dir;
  if (dir.empty() && !run_dir.empty()) {
    dir = run_dir + (sample->parsed() ? "/sample-" + (method.empty() ? std::string("default") : method) : "/eval");
  }
  dir = output_dir(active, dir, sub->get_name().c_str());

  if (sample->parsed()) {
    sbvae_sample_options o;
    sbvae_sample_options_init(&o);
    if (!method.empty()) o.method = method.c_str();
    if (!scheme.empty()) o.scheme = scheme.c_str();
    if (n_samples) o.n_samples = *n_samples;
    o.steps = steps;
    if (sample_seed) {
      o.has_seed = 1;
      o.seed = *sample_seed;
    }
    o.raw_units = raw_units ? 1 : 0;
    const sbvae_status s = sbvae_sample_run(model.get(), &o, dir.c_str(), svg ? 1 : 0);
    if (s == SBVAE_OK) std::cout << "samples: " << dir << "/samples.csv\n";
    return report(s);
  }

  sbvae_eval_options o;
  sbvae_eval_options_init(&o);
  if (!samples_csv.empty()) o.samples_csv = samples_csv.c_str();
  if (!reference_csv.empty()) o.reference_csv = reference_csv.c_str();
  o.model = model.get();
  o.config = cfg.get();
  if (max_sw2) o.max_sliced_w2 = *max_sw2;
  if (max_kl) o.max_knn_kl = *max_kl;
  if (max_mse) o.max_score_mse = *max_mse;
  if (max_gap) o.max_prior_gap = *max_gap;
  const sbvae_status s = sbvae_eval(&o, dir.c_str());
  if (s == SBVAE_OK || s == SBVAE_CHECK_FAILED) std::cout << "metrics: " << dir << "/metrics.json\n";
  return report(s);
}
