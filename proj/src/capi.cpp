// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/sbvae.h"

#include "sbvae/app/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

using namespace sbvae;
namespace fs = std::filesystem;

struct sbvae_config {
  app::ExperimentConfig cfg;
};

struct sbvae_model {
  sbvae_config config;
  app::Model model;
  const app::ExperimentConfig& cfg() const { return config.cfg; }
};

namespace {

thread_local std::string g_last_error;

std::mutex g_msg_mutex;
sbvae_message_fn g_msg_fn = nullptr;
void* g_msg_user = nullptr;

void message(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_msg_mutex);
  if (g_msg_fn != nullptr) {
    g_msg_fn(line.c_str(), g_msg_user);
  } else {
    std::cerr << line << '\n';
  }
}

sbvae_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Shape:
      return SBVAE_ERR_SHAPE;
    case ErrorKind::Contract:
      return SBVAE_ERR_CONTRACT;
    case ErrorKind::Divergence:
      return SBVAE_ERR_DIVERGENCE;
    case ErrorKind::Degenerate:
      return SBVAE_ERR_DEGENERATE;
    case ErrorKind::Mode:
      return SBVAE_ERR_MODE;
    case ErrorKind::Config:
      return SBVAE_ERR_CONFIG;
    case ErrorKind::Io:
      return SBVAE_ERR_IO;
    case ErrorKind::Numeric:
      return SBVAE_ERR_NUMERIC;
  }
  return SBVAE_ERR_INTERNAL;
}

template <class F>
sbvae_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return SBVAE_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SBVAE_ERR_INTERNAL;
  }
}

sbvae_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed != nullptr) *needed = s.size() + 1;
  if (buf != nullptr && cap > 0) {
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return SBVAE_OK;
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw ContractError(std::string(what) + " must not be NULL");
}

sampler::SamplerConfig resolve(const sbvae_model& m, const sbvae_sample_options* o) {
  app::ExperimentConfig cfg = m.cfg();
  if (o != nullptr && o->method != nullptr) cfg.sampler.method = o->method;
  if (o != nullptr && o->scheme != nullptr) cfg.sampler.scheme = o->scheme;
  if (o != nullptr && o->n_samples >= 0) cfg.sampler.n_samples = static_cast<int>(o->n_samples);
  cfg.validate();
  sampler::SamplerConfig sc = cfg.sampler_config();
  if (o != nullptr && o->steps > 0) sc.steps = o->steps;
  if (o != nullptr && o->has_seed) sc.seed = o->seed;
  return sc;
}

Matrix draw(const sbvae_model& m, const sbvae_sample_options* o) {
  Matrix x = app::generate_samples(m.model, m.cfg(), resolve(m, o));
  if (o != nullptr && o->raw_units) x = m.model.transform.invert(x);
  return x;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

extern "C" {

const char* sbvae_last_error(void) { return g_last_error.c_str(); }
const char* sbvae_version(void) { return kVersion; }

const char* sbvae_status_name(sbvae_status s) {
  switch (s) {
    case SBVAE_OK:
      return "ok";
    case SBVAE_ERR_SHAPE:
      return "shape error";
    case SBVAE_ERR_CONTRACT:
      return "contract error";
    case SBVAE_ERR_DIVERGENCE:
      return "divergence";
    case SBVAE_ERR_DEGENERATE:
      return "degenerate noise";
    case SBVAE_ERR_MODE:
      return "mode error";
    case SBVAE_ERR_CONFIG:
      return "config error";
    case SBVAE_ERR_IO:
      return "io error";
    case SBVAE_ERR_NUMERIC:
      return "numeric error";
    case SBVAE_ERR_INTERNAL:
      return "internal error";
    case SBVAE_CHECK_FAILED:
      return "check failed";
  }
  return "unknown";
}

void sbvae_set_message_handler(sbvae_message_fn fn, void* user) {
  {
    std::lock_guard<std::mutex> lock(g_msg_mutex);
    g_msg_fn = fn;
    g_msg_user = user;
  }
  if (fn != nullptr) {
    set_warning_handler([](const std::string& w) { message("warning: " + w); });
  } else {
    set_warning_handler({});
  }
}

sbvae_status sbvae_config_new(sbvae_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new sbvae_config{};
    return SBVAE_OK;
  });
}

sbvae_status sbvae_config_load(const char* path, sbvae_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sbvae_config{app::ExperimentConfig::load(path)};
    return SBVAE_OK;
  });
}

sbvae_status sbvae_config_set(sbvae_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "cfg");
    require(assignment, "assignment");
    cfg->cfg.set(assignment);
    return SBVAE_OK;
  });
}

sbvae_status sbvae_config_json(const sbvae_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    return copy_out(cfg->cfg.to_json(), buf, cap, needed);
  });
}

int sbvae_config_dim(const sbvae_config* cfg) { return cfg == nullptr ? 0 : cfg->cfg.dataset.dim; }

uint64_t sbvae_config_seed(const sbvae_config* cfg) { return cfg == nullptr ? 0 : cfg->cfg.seed; }

void sbvae_config_free(sbvae_config* cfg) { delete cfg; }

sbvae_status sbvae_output_dir(const sbvae_config* cfg, const char* explicit_dir, const char* command, char* buf,
                              size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(command, "command");
    const auto dir = app::resolve_output_dir(explicit_dir != nullptr ? explicit_dir : "", cfg->cfg, command);
    return copy_out(dir.string(), buf, cap, needed);
  });
}

sbvae_status sbvae_train(const sbvae_config* cfg, const char* run_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(run_dir, "run_dir");
    const auto res = app::train(cfg->cfg, run_dir, message);
    if (res.aborted) {
      g_last_error = res.message;
      return SBVAE_CHECK_FAILED;
    }
    return SBVAE_OK;
  });
}

sbvae_status sbvae_model_load(const char* run_dir, const char* checkpoint, sbvae_model** out) {
  return guarded([&] {
    require(run_dir, "run_dir");
    require(out, "out");
    auto cfg = app::load_run_config(run_dir);
    auto model = app::load_run_model(run_dir, checkpoint != nullptr ? checkpoint : "");
    *out = new sbvae_model{sbvae_config{std::move(cfg)}, std::move(model)};
    return SBVAE_OK;
  });
}

sbvae_status sbvae_model_from_config(const sbvae_config* cfg, sbvae_model** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    const app::ExperimentConfig& c = cfg->cfg;
    c.validate();
    // Mixture kinds standardize with exact moments, so no draw is needed.
    const data::Standardization t = c.data.file.empty() && data::standardized_law(c.dataset)
                                        ? data::generate(c.dataset, 0, 0).transform
                                        : app::training_data(c).transform;
    *out = new sbvae_model{*cfg, app::make_model(c, t)};
    return SBVAE_OK;
  });
}

int sbvae_model_dim(const sbvae_model* m) { return m == nullptr ? 0 : m->model.dim(); }

const sbvae_config* sbvae_model_config(const sbvae_model* m) {
  return m == nullptr ? nullptr : &m->config;
}

void sbvae_model_free(sbvae_model* m) { delete m; }

void sbvae_sample_options_init(sbvae_sample_options* o) {
  if (o == nullptr) return;
  *o = sbvae_sample_options{nullptr, nullptr, -1, 0, 0, 0, 0};
}

sbvae_status sbvae_sample(const sbvae_model* m, const sbvae_sample_options* o, double* out, size_t cap,
                          int64_t* rows) {
  return guarded([&] {
    require(m, "model");
    const Matrix x = draw(*m, o);
    if (rows != nullptr) *rows = x.rows();
    if (static_cast<size_t>(x.size()) > cap) throw ContractError("output buffer too small");
    if (x.size() > 0) require(out, "out");
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) out[r * x.cols() + c] = x(r, c);
    }
    return SBVAE_OK;
  });
}

sbvae_status sbvae_sample_run(const sbvae_model* m, const sbvae_sample_options* o, const char* out_dir, int svg) {
  return guarded([&] {
    require(m, "model");
    require(out_dir, "out_dir");
    const auto t0 = std::chrono::steady_clock::now();
    const sampler::SamplerConfig sc = resolve(*m, o);
    app::ExperimentConfig cfg = m->cfg();
    cfg.sampler.method = sampler::to_string(sc.method);
    cfg.sampler.scheme = sampler::to_string(sc.scheme);
    cfg.sampler.n_samples = static_cast<int>(sc.n_samples);
    const Matrix x = draw(*m, o);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::vector<std::string> files{"samples.csv"};
    data::write_samples_csv(dir / "samples.csv", x, m->model.dim());
    if (svg != 0) {
      if (x.cols() != 2) throw ShapeError("SVG output needs 2-D samples");
      app::write_svg_scatter(dir / "samples.svg", x);
      files.push_back("samples.svg");
    }
    app::write_run_files(dir, cfg, "sample", seconds_since(t0), files);
    return SBVAE_OK;
  });
}

void sbvae_eval_options_init(sbvae_eval_options* o) {
  if (o == nullptr) return;
  const double off = std::nan("");
  *o = sbvae_eval_options{nullptr, nullptr, nullptr, nullptr, off, off, off, off};
}

sbvae_status sbvae_eval(const sbvae_eval_options* o, const char* out_dir) {
  return guarded([&] {
    require(o, "options");
    require(out_dir, "out_dir");
    if (o->model == nullptr && o->config == nullptr) throw ContractError("eval needs a model or a config");
    const auto t0 = std::chrono::steady_clock::now();
    const app::ExperimentConfig& cfg = o->model != nullptr ? o->model->cfg() : o->config->cfg;
    Matrix samples;
    if (o->samples_csv != nullptr) {
      samples = data::read_samples_csv(fs::path(o->samples_csv));
    } else {
      if (o->model == nullptr) throw ContractError("eval without a samples file needs a model");
      samples = draw(*o->model, nullptr);
    }
    Matrix reference;
    if (o->reference_csv != nullptr) {
      reference = data::read_samples_csv(fs::path(o->reference_csv));
    } else if (o->model != nullptr) {
      reference = app::holdout_data(cfg, o->model->model.transform, cfg.eval.n_reference);
    } else {
      reference = data::generate(cfg.dataset, cfg.eval.n_reference, app::PhaseSeeds::from(cfg.seed).holdout).samples;
    }
    app::EvalOptions eo;
    auto opt = [](double v) { return std::isnan(v) ? std::optional<double>() : std::optional<double>(v); };
    eo.max_sliced_w2 = opt(o->max_sliced_w2);
    eo.max_knn_kl = opt(o->max_knn_kl);
    eo.max_score_mse = opt(o->max_score_mse);
    eo.max_prior_gap = opt(o->max_prior_gap);
    const auto res = app::evaluate(samples, reference, cfg, o->model != nullptr ? &o->model->model : nullptr, eo);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    {
      std::ofstream out(dir / "metrics.json", std::ios::binary);
      if (!out) throw IoError("cannot write '" + (dir / "metrics.json").string() + "'");
      out << res.json;
    }
    app::write_run_files(dir, cfg, "eval", seconds_since(t0), {"metrics.json"});
    message(res.json);
    if (!res.pass) {
      g_last_error = "a metric exceeded its threshold";
      return SBVAE_CHECK_FAILED;
    }
    return SBVAE_OK;
  });
}

sbvae_status sbvae_verify(uint64_t seed, double perturbation, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    app::VerifyOptions vo;
    vo.seed = seed;
    vo.perturbation = perturbation;
    const auto reports = app::verify_suite(vo);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ostringstream jsonl, summary;
    verify::write_jsonl(jsonl, reports);
    verify::write_summary(summary, reports);
    std::ofstream(dir / "reports.jsonl", std::ios::binary) << jsonl.str();
    std::ofstream(dir / "summary.txt", std::ios::binary) << summary.str();
    message(summary.str());
    std::string failing;
    for (const auto& r : reports) {
      if (!r.pass) failing += (failing.empty() ? "" : ", ") + r.name;
    }
    if (!failing.empty()) {
      g_last_error = "failing checks: " + failing;
      return SBVAE_CHECK_FAILED;
    }
    return SBVAE_OK;
  });
}

}  // extern "C"
