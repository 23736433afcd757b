// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/app/model.hpp"

#include <json.hpp>

#include <algorithm>

namespace sbvae::app {
namespace {

using nlohmann::json;

bool has_encoder_net(obj::ModelMode m) { return m != obj::ModelMode::Sbm; }

void append(ad::ParameterSet& dst, const std::string& prefix, const ad::Mlp& net) {
  const auto& src = net.parameters();
  for (std::size_t i = 0; i < src.layers().size(); ++i) {
    const auto& l = src.layers()[i];
    dst.set_block(dst.add(prefix + l.name, l.rows, l.cols), src.block(i));
  }
}

void extract(const ad::ParameterSet& src, const std::string& prefix, ad::Mlp& net,
             const std::filesystem::path& path) {
  auto& dst = net.parameters();
  for (std::size_t i = 0; i < dst.layers().size(); ++i) {
    const auto& l = dst.layers()[i];
    const std::string name = prefix + l.name;
    const auto& layers = src.layers();
    const auto it = std::find_if(layers.begin(), layers.end(), [&](const ad::LayerSlot& s) { return s.name == name; });
    if (it == layers.end() || it->rows != l.rows || it->cols != l.cols) {
      throw IoError("checkpoint '" + path.string() + "': layer '" + name + "' missing or mis-shaped");
    }
    dst.set_block(i, src.block(static_cast<std::size_t>(it - layers.begin())));
  }
}

}  // namespace

sde::DriftField Model::encoder() const {
  if (oracle || mode == obj::ModelMode::Sbm) return base;
  const auto net = sde::DriftField::mlp(encoder_net);
  if (mode == obj::ModelMode::ShiftedSb) return sde::DriftField::shifted(base, net, sched, +1.0);
  return net;
}

sde::DriftField Model::decoder() const {
  if (oracle) return oracle->reverse_drift_field();
  const auto net = sde::DriftField::mlp(decoder_net);
  if (mode == obj::ModelMode::FullSb) return net;
  return sde::DriftField::shifted(base, net, sched, -1.0);
}

sde::DriftField Model::score() const {
  if (oracle) return oracle->score_field();
  if (mode == obj::ModelMode::FullSb) throw ModeError("full-sb models have no score network s'");
  return sde::DriftField::mlp(decoder_net);
}

Model make_model(const ExperimentConfig& cfg, const data::Standardization& transform) {
  Model m;
  m.mode = cfg.model_mode();
  m.sched = cfg.noise_schedule();
  m.base = cfg.base_field();
  m.transform = transform;
  if (cfg.oracle) {
    const auto law = data::standardized_law(cfg.dataset);
    if (!law) throw ConfigError("oracle mode needs a Gaussian-mixture dataset kind");
    m.oracle = oracle::oracle_for(m.base, *law, m.sched);
    return m;
  }
  const auto seeds = PhaseSeeds::from(cfg.seed);
  const ad::MlpSpec spec = cfg.mlp_spec();
  if (has_encoder_net(m.mode)) m.encoder_net = std::make_shared<ad::Mlp>(ad::Mlp::create(spec, seeds.init_encoder));
  m.decoder_net = std::make_shared<ad::Mlp>(ad::Mlp::create(spec, seeds.init_decoder));
  return m;
}

void save_model(const std::filesystem::path& path, const Model& m) {
  if (m.oracle) throw ModeError("oracle models have no parameters to save");
  ad::ParameterSet all;
  json meta;
  meta["mode"] = obj::to_string(m.mode);
  meta["step"] = m.step;
  meta["dim"] = m.dim();
  meta["standardization"] = {{"mean", std::vector<double>(m.transform.mean.data(),
                                                          m.transform.mean.data() + m.transform.mean.size())},
                             {"scale", m.transform.scale}};
  if (m.encoder_net) {
    append(all, "encoder.", *m.encoder_net);
    meta["encoder"] = json::parse(m.encoder_net->spec().to_json());
  }
  append(all, "decoder.", *m.decoder_net);
  meta["decoder"] = json::parse(m.decoder_net->spec().to_json());
  ad::write_checkpoint(path, all, meta.dump());
}

Model load_model(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  if (cfg.oracle) throw ModeError("oracle mode has no checkpoint to load");
  const ad::Checkpoint ck = ad::read_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ck.metadata_json);
  } catch (const json::exception&) {
    throw IoError("checkpoint '" + path.string() + "': metadata is not valid JSON");
  }
  const auto where = "checkpoint '" + path.string() + "': ";
  if (meta.value("mode", std::string()) != cfg.mode) {
    throw IoError(where + "mode '" + meta.value("mode", std::string("?")) + "' does not match config mode '" +
                  cfg.mode + "'");
  }
  if (meta.value("dim", 0) != cfg.dataset.dim) {
    throw IoError(where + "dimension " + std::to_string(meta.value("dim", 0)) + " does not match config dimension " +
                  std::to_string(cfg.dataset.dim));
  }
  Model m = make_model(cfg, data::Standardization::identity(cfg.dataset.dim));
  m.step = meta.value("step", 0L);
  const auto& st = meta.at("standardization");
  const auto mean = st.at("mean").get<std::vector<double>>();
  if (static_cast<int>(mean.size()) != cfg.dataset.dim) throw IoError(where + "standardization has wrong dimension");
  m.transform.mean = Eigen::Map<const Vector>(mean.data(), cfg.dataset.dim);
  m.transform.scale = st.at("scale").get<double>();
  if (m.encoder_net) extract(ck.params, "encoder.", *m.encoder_net, path);
  extract(ck.params, "decoder.", *m.decoder_net, path);
  const std::size_t expected = (m.encoder_net ? m.encoder_net->parameters().count() : 0) +
                               m.decoder_net->parameters().count();
  if (ck.params.count() != expected) throw IoError(where + "network architecture does not match config");
  return m;
}

}  // namespace sbvae::app
