// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/app/config.hpp"

#include "sbvae/random.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sbvae::app {
namespace {

using nlohmann::json;

json tree(const ExperimentConfig& c) {
  json j;
  j["mode"] = c.mode;
  j["oracle"] = c.oracle;
  j["dataset"] = json::parse(c.dataset.to_json());
  j["prior"] = {{"kind", c.prior.kind}, {"mean", c.prior.mean}, {"variance", c.prior.variance}};
  j["schedule"] = {{"T", c.schedule.horizon}, {"N", c.schedule.steps}, {"kind", c.schedule.kind},
                   {"g", c.schedule.g},       {"g_min", c.schedule.g_min}, {"g_max", c.schedule.g_max}};
  j["base_drift"] = {{"kind", c.base_drift.kind}, {"alpha", c.base_drift.alpha}};
  j["network"] = {{"hidden", c.network.hidden},
                  {"activation", c.network.activation},
                  {"time_features", c.network.time_features}};
  const auto& o = c.optimizer;
  j["optimizer"] = {{"lr", o.lr},
                    {"steps", o.steps},
                    {"batch", o.batch},
                    {"clip_norm", o.clip_norm},
                    {"alternating", o.alternating},
                    {"alternate_every", o.alternate_every},
                    {"checkpoint_every", o.checkpoint_every}};
  j["loss"] = {{"divergence", c.loss.divergence}, {"probes", c.loss.probes}, {"chunk", c.loss.chunk}};
  j["data"] = {{"n_train", c.data.n_train}, {"file", c.data.file}};
  j["sampler"] = {{"method", c.sampler.method},
                  {"n_samples", c.sampler.n_samples},
                  {"sde_steps", c.sampler.sde_steps},
                  {"ode_steps", c.sampler.ode_steps},
                  {"scheme", c.sampler.scheme}};
  j["eval"] = {{"n_reference", c.eval.n_reference},
               {"projections", c.eval.projections},
               {"knn_k", c.eval.knn_k},
               {"score_points", c.eval.score_points}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig from_tree(const json& j) {
  ExperimentConfig c;
  c.mode = j.at("mode").get<std::string>();
  c.oracle = j.at("oracle").get<bool>();
  c.dataset = data::DatasetSpec::from_json(j.at("dataset").dump());
  const auto& p = j.at("prior");
  c.prior.kind = p.at("kind").get<std::string>();
  c.prior.mean = p.at("mean").get<std::vector<double>>();
  c.prior.variance = p.at("variance").get<double>();
  const auto& s = j.at("schedule");
  c.schedule.horizon = s.at("T").get<double>();
  c.schedule.steps = s.at("N").get<int>();
  c.schedule.kind = s.at("kind").get<std::string>();
  c.schedule.g = s.at("g").get<double>();
  c.schedule.g_min = s.at("g_min").get<double>();
  c.schedule.g_max = s.at("g_max").get<double>();
  c.base_drift.kind = j.at("base_drift").at("kind").get<std::string>();
  c.base_drift.alpha = j.at("base_drift").at("alpha").get<double>();
  const auto& n = j.at("network");
  c.network.hidden = n.at("hidden").get<std::vector<int>>();
  c.network.activation = n.at("activation").get<std::string>();
  c.network.time_features = n.at("time_features").get<bool>();
  const auto& o = j.at("optimizer");
  c.optimizer.lr = o.at("lr").get<double>();
  c.optimizer.steps = o.at("steps").get<int>();
  c.optimizer.batch = o.at("batch").get<int>();
  c.optimizer.clip_norm = o.at("clip_norm").get<double>();
  c.optimizer.alternating = o.at("alternating").get<bool>();
  c.optimizer.alternate_every = o.at("alternate_every").get<int>();
  c.optimizer.checkpoint_every = o.at("checkpoint_every").get<int>();
  const auto& l = j.at("loss");
  c.loss.divergence = l.at("divergence").get<std::string>();
  c.loss.probes = l.at("probes").get<int>();
  c.loss.chunk = l.at("chunk").get<int>();
  c.data.n_train = j.at("data").at("n_train").get<int>();
  c.data.file = j.at("data").at("file").get<std::string>();
  const auto& sm = j.at("sampler");
  c.sampler.method = sm.at("method").get<std::string>();
  c.sampler.n_samples = sm.at("n_samples").get<int>();
  c.sampler.sde_steps = sm.at("sde_steps").get<int>();
  c.sampler.ode_steps = sm.at("ode_steps").get<int>();
  c.sampler.scheme = sm.at("scheme").get<std::string>();
  const auto& e = j.at("eval");
  c.eval.n_reference = e.at("n_reference").get<int>();
  c.eval.projections = e.at("projections").get<int>();
  c.eval.knn_k = e.at("knn_k").get<int>();
  c.eval.score_points = e.at("score_points").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();
  return c;
}

// Copies src onto dst; every key in src must already exist in dst.
void merge_strict(json& dst, const json& src, const std::string& where) {
  if (!src.is_object()) throw ConfigError("config: expected an object at '" + where + "'");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

ExperimentConfig parse_tree(const json& j) {
  try {
    return from_tree(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

PhaseSeeds PhaseSeeds::from(std::uint64_t master) {
  return {derive_seed(master, 0x64617461),   derive_seed(master, 0x686f6c64),
          derive_seed(master, 0x656e6330),   derive_seed(master, 0x64656330),
          derive_seed(master, 0x62617463),   derive_seed(master, 0x74726169),
          derive_seed(master, 0x73616d70),   derive_seed(master, 0x6576616c)};
}

std::string ExperimentConfig::to_json() const { return tree(*this).dump(2); }

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  json base = tree(ExperimentConfig{});
  merge_strict(base, in, "");
  ExperimentConfig c = parse_tree(base);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ExperimentConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json j = tree(*this);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("config: unknown key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config: '" + key + "' is not a leaf");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = value;
  ExperimentConfig c = parse_tree(j);
  c.validate();
  *this = std::move(c);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("config: " + why); };
  obj::mode_from_string(mode);
  dataset.validate();
  const int d = dataset.dim;
  if (prior.kind != "standard-normal" && prior.kind != "gaussian") {
    fail("prior.kind must be standard-normal or gaussian");
  }
  if (!prior.mean.empty() && static_cast<int>(prior.mean.size()) != d) fail("prior.mean has wrong length");
  if (!(prior.variance > 0.0)) fail("prior.variance must be > 0");
  if (!(schedule.horizon > 0.0)) fail("schedule.T must be > 0");
  if (schedule.steps < 1) fail("schedule.N must be >= 1");
  if (schedule.kind == "constant") {
    if (!(schedule.g > 0.0)) fail("schedule.g must be > 0");
  } else if (schedule.kind == "linear") {
    if (!(schedule.g_min > 0.0)) fail("schedule.g_min must be > 0 (g may not vanish)");
    if (!(schedule.g_max > 0.0)) fail("schedule.g_max must be > 0");
  } else {
    fail("schedule.kind must be constant or linear");
  }
  if (base_drift.kind != "zero" && base_drift.kind != "ou") fail("base_drift.kind must be zero or ou");
  if (base_drift.kind == "ou" && !(base_drift.alpha > 0.0)) fail("base_drift.alpha must be > 0");
  if (network.hidden.empty()) fail("network.hidden needs at least one layer");
  for (int h : network.hidden) {
    if (h < 1) fail("network.hidden widths must be >= 1");
  }
  ad::activation_from_string(network.activation);
  if (!(optimizer.lr > 0.0)) fail("optimizer.lr must be > 0");
  if (optimizer.steps < 0) fail("optimizer.steps must be >= 0");
  if (optimizer.batch < 1) fail("optimizer.batch must be >= 1");
  if (optimizer.clip_norm < 0.0) fail("optimizer.clip_norm must be >= 0");
  if (optimizer.alternate_every < 1) fail("optimizer.alternate_every must be >= 1");
  if (optimizer.checkpoint_every < 0) fail("optimizer.checkpoint_every must be >= 0");
  if (loss.divergence != "exact" && loss.divergence != "hutchinson") {
    fail("loss.divergence must be exact or hutchinson");
  }
  if (loss.probes < 1) fail("loss.probes must be >= 1");
  if (loss.chunk < 1) fail("loss.chunk must be >= 1");
  if (data.n_train < 2) fail("data.n_train must be >= 2");
  sampler::method_from_string(sampler.method);
  sampler::scheme_from_string(sampler.scheme);
  if (sampler.n_samples < 0) fail("sampler.n_samples must be >= 0");
  if (sampler.sde_steps < 0) fail("sampler.sde_steps must be >= 0");
  if (sampler.ode_steps < 1) fail("sampler.ode_steps must be >= 1");
  if (eval.n_reference < 2) fail("eval.n_reference must be >= 2");
  if (eval.projections < 1) fail("eval.projections must be >= 1");
  if (eval.knn_k < 1) fail("eval.knn_k must be >= 1");
  if (eval.score_points < 1) fail("eval.score_points must be >= 1");
  if (oracle) {
    if (!data.file.empty()) fail("oracle mode needs a generated dataset with a closed-form law");
    if (!data::standardized_law(dataset)) {
      fail("oracle mode needs a Gaussian-mixture dataset kind (gaussian, gmm, ring-gmm)");
    }
  }
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(tree(*this).dump())));
  return buf;
}

sde::NoiseSchedule ExperimentConfig::noise_schedule() const {
  if (schedule.kind == "linear") {
    return sde::NoiseSchedule::linear(schedule.g_min, schedule.g_max, schedule.horizon);
  }
  return sde::NoiseSchedule::constant(schedule.g);
}

sde::DriftField ExperimentConfig::base_field() const {
  const int d = dataset.dim;
  if (base_drift.kind == "ou") {
    return sde::DriftField::linear(-base_drift.alpha * Matrix::Identity(d, d), Vector::Zero(d));
  }
  return sde::DriftField::linear(Matrix::Zero(d, d), Vector::Zero(d));
}

oracle::GaussianMixture ExperimentConfig::prior_law() const {
  const int d = dataset.dim;
  if (prior.kind == "standard-normal") return oracle::GaussianMixture(oracle::Gaussian::standard(d));
  Vector m = Vector::Zero(d);
  if (!prior.mean.empty()) m = Eigen::Map<const Vector>(prior.mean.data(), d);
  return oracle::GaussianMixture(oracle::Gaussian{m, prior.variance * Matrix::Identity(d, d)});
}

ad::MlpSpec ExperimentConfig::mlp_spec() const {
  ad::MlpSpec s;
  s.dim = dataset.dim;
  s.hidden = network.hidden;
  s.activation = ad::activation_from_string(network.activation);
  s.time_features = network.time_features;
  s.horizon = schedule.horizon;
  s.zero_final_layer = true;
  return s;
}

ad::AdamConfig ExperimentConfig::adam() const {
  ad::AdamConfig a;
  a.lr = optimizer.lr;
  a.clip_norm = optimizer.clip_norm;
  return a;
}

obj::ImplicitOptions ExperimentConfig::implicit_options() const {
  obj::ImplicitOptions o;
  o.mode = model_mode();
  o.chunk = loss.chunk;
  o.divergence.hutchinson = loss.divergence == "hutchinson";
  o.divergence.probes = loss.probes;
  return o;
}

sampler::SamplerConfig ExperimentConfig::sampler_config() const {
  sampler::SamplerConfig s;
  s.method = sampler::method_from_string(sampler.method);
  s.scheme = sampler::scheme_from_string(sampler.scheme);
  s.n_samples = sampler.n_samples;
  s.steps = s.method == sampler::Method::Sde
                ? (sampler.sde_steps > 0 ? sampler.sde_steps : schedule.steps)
                : sampler.ode_steps;
  s.seed = PhaseSeeds::from(seed).sample;
  return s;
}

}  // namespace sbvae::app
