// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/app/config.hpp"
#include "sbvae/oracle/linear_sde.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace sbvae::app {

/// Encoder/decoder pair of a run.
///   full-sb:    u = net_u,            s = net_s
///   shifted-sb: u = f + g^2 net_u,    s = f - g^2 net_s
///   sbm:        u = f,                s = f - g^2 net_s (net_s is the score s')
///   oracle:     u = f,                s = exact reverse drift
struct Model {
  obj::ModelMode mode = obj::ModelMode::FullSb;
  sde::NoiseSchedule sched = sde::NoiseSchedule::constant(1.0);
  sde::DriftField base = sde::DriftField::zero(1);
  std::shared_ptr<ad::Mlp> encoder_net;  // null for sbm and oracle
  std::shared_ptr<ad::Mlp> decoder_net;  // null for oracle
  std::optional<oracle::DensityOracle> oracle;
  data::Standardization transform = data::Standardization::identity(1);
  long step = 0;

  int dim() const { return base.dim(); }
  sde::DriftField encoder() const;
  sde::DriftField decoder() const;
  /// s' of the decoder (sbm, shifted-sb) or the exact score (oracle);
  /// ModeError in full-sb mode.
  sde::DriftField score() const;
};

/// Fresh model at initialization (or the exact pair when cfg.oracle).
Model make_model(const ExperimentConfig& cfg, const data::Standardization& transform);

/// One file holding every network: layers are prefixed "encoder." / "decoder.";
/// the metadata records mode, step, network specs and the standardization.
void save_model(const std::filesystem::path& path, const Model& m);
/// Throws IoError when the file does not match the config (mode, dimension,
/// architecture).
Model load_model(const std::filesystem::path& path, const ExperimentConfig& cfg);

}  // namespace sbvae::app
