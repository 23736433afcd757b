// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/adgrad/adam.hpp"
#include "sbvae/adgrad/mlp.hpp"
#include "sbvae/data/dataset.hpp"
#include "sbvae/objectives/losses.hpp"
#include "sbvae/oracle/gaussian.hpp"
#include "sbvae/sampler/sampler.hpp"
#include "sbvae/sde/drift.hpp"
#include "sbvae/sde/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sbvae::app {

struct PriorSpec {
  /// standard-normal | gaussian (isotropic)
  std::string kind = "standard-normal";
  std::vector<double> mean;  // empty means zero
  double variance = 1.0;
};

struct ScheduleSpec {
  double horizon = 1.0;
  int steps = 64;
  /// constant | linear
  std::string kind = "constant";
  double g = 1.0;
  double g_min = 0.1;
  double g_max = 1.0;
};

struct BaseDriftSpec {
  /// zero | ou (dx = -alpha x dt)
  std::string kind = "zero";
  double alpha = 1.0;
};

struct NetworkSpec {
  std::vector<int> hidden{64, 64};
  std::string activation = "tanh";
  bool time_features = true;
};

struct OptimizerSpec {
  double lr = 2e-3;
  int steps = 2000;
  int batch = 128;
  double clip_norm = 10.0;
  bool alternating = false;
  int alternate_every = 100;
  /// 0 writes only the final checkpoint.
  int checkpoint_every = 500;
};

struct LossSpec {
  /// exact | hutchinson
  std::string divergence = "exact";
  int probes = 1;
  int chunk = 64;
};

struct TrainDataSpec {
  int n_train = 20000;
  /// Samples CSV used instead of the generator when non-empty.
  std::string file;
};

struct SamplerSpec {
  std::string method = "sde";
  int n_samples = 5000;
  /// SDE steps; 0 uses the schedule's N.
  int sde_steps = 0;
  int ode_steps = 128;
  std::string scheme = "heun";
};

struct EvalSpec {
  int n_reference = 5000;
  int projections = 256;
  int knn_k = 5;
  int score_points = 2000;
};

/// Everything a run needs. Serializes to a JSON tree whose leaves can be
/// overridden by dotted path.
struct ExperimentConfig {
  std::string mode = "full-sb";
  /// Exact encoder/decoder pair from closed-form marginals; nothing is trained.
  bool oracle = false;
  data::DatasetSpec dataset;
  PriorSpec prior;
  ScheduleSpec schedule;
  BaseDriftSpec base_drift;
  NetworkSpec network;
  OptimizerSpec optimizer;
  LossSpec loss;
  TrainDataSpec data;
  SamplerSpec sampler;
  EvalSpec eval;
  std::uint64_t seed = 0;
  std::string output_dir;

  std::string to_json() const;  // pretty, sorted keys
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Overrides one leaf, e.g. "optimizer.lr=1e-3". The path must exist in the
  /// tree; the value is parsed as JSON and otherwise taken as a string.
  void set(const std::string& assignment);
  /// Throws ConfigError on the first invalid field.
  void validate() const;
  /// FNV-1a 64 of the compact JSON, as 16 hex digits.
  std::string hash() const;

  obj::ModelMode model_mode() const { return obj::mode_from_string(mode); }
  sde::NoiseSchedule noise_schedule() const;
  sde::TimeGrid grid() const { return sde::TimeGrid(schedule.horizon, schedule.steps); }
  sde::DriftField base_field() const;
  oracle::GaussianMixture prior_law() const;
  ad::MlpSpec mlp_spec() const;
  ad::AdamConfig adam() const;
  obj::ImplicitOptions implicit_options() const;
  sampler::SamplerConfig sampler_config() const;
};

/// Per-phase seeds derived from the master seed.
struct PhaseSeeds {
  std::uint64_t data, holdout, init_encoder, init_decoder, batches, train, sample, eval;
  static PhaseSeeds from(std::uint64_t master);
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace sbvae::app
