// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/app/config.hpp"
#include "sbvae/app/model.hpp"
#include "sbvae/verify/checks.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sbvae::app {

using Log = std::function<void(const std::string&)>;

/// Explicit directory, else cfg.output_dir, else $SBVAE_OUTPUT_ROOT/<command>-<hash>,
/// else runs/<command>-<hash>.
std::filesystem::path resolve_output_dir(const std::string& explicit_dir, const ExperimentConfig& cfg,
                                         const std::string& command);

/// config.json plus manifest.json (hash, version, wall clock, seeds, files).
void write_run_files(const std::filesystem::path& dir, const ExperimentConfig& cfg, const std::string& command,
                     double wall_seconds, const std::vector<std::string>& files);

/// Training data in model units: the CSV file when configured, else the generator.
data::Dataset training_data(const ExperimentConfig& cfg);
/// Held-out draws from the generator, mapped into the units of `transform`.
Matrix holdout_data(const ExperimentConfig& cfg, const data::Standardization& transform, Eigen::Index n);

struct TrainResult {
  long steps_done = 0;
  bool aborted = false;
  std::string message;
  obj::LossBreakdown last;
};

/// Writes config.json, manifest.json, loss.csv, checkpoints/step_XXXXXXXX.ckpt
/// every optimizer.checkpoint_every steps and model.ckpt. On a non-finite loss
/// or gradient the run stops, model.ckpt holds the last good parameters and
/// aborted is set.
TrainResult train(const ExperimentConfig& cfg, const std::filesystem::path& dir, const Log& log = {});

/// Run directory contents.
ExperimentConfig load_run_config(const std::filesystem::path& dir);
Model load_run_model(const std::filesystem::path& dir, const std::string& checkpoint = "");

/// Samples at t = 0 in model units.
Matrix generate_samples(const Model& m, const ExperimentConfig& cfg, const sampler::SamplerConfig& sc);

/// Scatter plot of 2-D points; optional reference points drawn underneath.
void write_svg_scatter(const std::filesystem::path& path, const Matrix& x, const Matrix* reference = nullptr);

struct EvalOptions {
  std::optional<double> max_sliced_w2;
  std::optional<double> max_knn_kl;
  std::optional<double> max_score_mse;
  std::optional<double> max_prior_gap;
};

struct EvalResult {
  std::string json;  // metrics document
  bool pass = true;
};

/// Metrics of `samples` against `reference`. With a model: score_mse when a
/// closed-form oracle applies, and the prior cross-entropy gap when the model
/// has an encoder.
EvalResult evaluate(const Matrix& samples, const Matrix& reference, const ExperimentConfig& cfg,
                    const Model* model, const EvalOptions& opts);

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Norm of the constant decoder perturbation in the Girsanov check.
  double perturbation = 0.5;
};

/// The oracle-backed identity suite.
std::vector<verify::CheckReport> verify_suite(const VerifyOptions& opts);

}  // namespace sbvae::app
