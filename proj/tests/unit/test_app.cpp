// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/app/commands.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sbvae::app {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sbvae_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const std::string& mode) {
  ExperimentConfig c;
  c.mode = mode;
  c.network.hidden = {8};
  c.optimizer.steps = 3;
  c.optimizer.batch = 16;
  c.optimizer.checkpoint_every = 2;
  c.schedule.steps = 8;
  c.data.n_train = 200;
  return c;
}

TEST(Config, RoundTripAndOverrides) {
  ExperimentConfig c;
  c.set("optimizer.lr=0.01");
  c.set("dataset.means=[[0,0],[1,1]]");
  c.set("dataset.kind=gmm");
  c.set("network.hidden=[4,4,4]");
  EXPECT_EQ(c.optimizer.lr, 0.01);
  EXPECT_EQ(c.dataset.kind, "gmm");
  EXPECT_EQ(c.network.hidden.size(), 3u);
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  c.set("seed=1");
  EXPECT_NE(back.hash(), c.hash());
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = ExperimentConfig::from_json(R"({"mode": "sbm", "schedule": {"N": 32}})");
  EXPECT_EQ(c.mode, "sbm");
  EXPECT_EQ(c.schedule.steps, 32);
  EXPECT_EQ(c.schedule.horizon, 1.0);
}

TEST(Config, Rejections) {
  ExperimentConfig c;
  EXPECT_THROW(c.set("optimizer.lrr=1"), ConfigError);
  EXPECT_THROW(c.set("optimizer=1"), ConfigError);
  EXPECT_THROW(c.set("novalue"), ConfigError);
  EXPECT_THROW(c.set("mode=diffusion"), ConfigError);
  c.set("schedule.kind=linear");
  EXPECT_THROW(c.set("schedule.g_min=0"), ConfigError);
  EXPECT_EQ(c.schedule.g_min, 0.1);  // unchanged after a rejected override
  EXPECT_THROW(ExperimentConfig::from_json(R"({"schedule": {"g_min": 0, "kind": "linear"}})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"extra": 1})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"optimizer": {"steps": "many"}})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json("{"), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"oracle": true, "dataset": {"kind": "two-moons"}})"), ConfigError);
}

TEST(Config, OutputRoot) {
  ExperimentConfig c;
  EXPECT_EQ(resolve_output_dir("x", c, "train"), fs::path("x"));
  ::setenv("SBVAE_OUTPUT_ROOT", "/tmp/root", 1);
  EXPECT_EQ(resolve_output_dir("", c, "train").parent_path(), fs::path("/tmp/root"));
  ::unsetenv("SBVAE_OUTPUT_ROOT");
  EXPECT_EQ(resolve_output_dir("", c, "train").parent_path(), fs::path("runs"));
  c.output_dir = "mine";
  EXPECT_EQ(resolve_output_dir("", c, "train"), fs::path("mine"));
}

TEST(Fnv, KnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Model, SaveLoadRoundTrip) {
  for (const char* mode : {"full-sb", "shifted-sb", "sbm"}) {
    const auto cfg = tiny(mode);
    Model m = make_model(cfg, data::Standardization{Vector{{0.5, -0.5}}, 2.0});
    m.decoder_net->parameters().values()[0] = 0.25;
    const fs::path p = scratch(std::string("model_") + mode);
    save_model(p, m);
    const Model back = load_model(p, cfg);
    EXPECT_EQ(back.decoder_net->parameters(), m.decoder_net->parameters());
    EXPECT_EQ(back.transform.scale, 2.0);
    const Matrix x = Matrix::Constant(3, 2, 0.3);
    EXPECT_EQ(back.decoder().eval(0.5, x), m.decoder().eval(0.5, x));
    EXPECT_EQ(back.encoder().eval(0.5, x), m.encoder().eval(0.5, x));
  }
}

TEST(Model, MismatchedCheckpointIsLoadError) {
  auto cfg = tiny("full-sb");
  const fs::path p = scratch("mismatch");
  save_model(p, make_model(cfg, data::Standardization::identity(2)));
  auto other = cfg;
  other.mode = "sbm";
  EXPECT_THROW(load_model(p, other), IoError);
  other = cfg;
  other.dataset.kind = "gaussian";
  other.dataset.dim = 3;
  EXPECT_THROW(load_model(p, other), IoError);
  other = cfg;
  other.network.hidden = {9};
  EXPECT_THROW(load_model(p, other), IoError);
}

TEST(Model, OracleFields) {
  auto cfg = tiny("sbm");
  cfg.oracle = true;
  cfg.dataset.kind = "gaussian";
  cfg.dataset.variance = 4.0;
  const Model m = make_model(cfg, data::Standardization::identity(2));
  // Standardized N(0, 1) data under a Brownian encoder: score -x / (1 + g^2 t).
  const Matrix x = Matrix::Constant(1, 2, 1.0);
  EXPECT_NEAR(m.score().eval(1.0, x)(0, 0), -0.5, 1e-14);
  EXPECT_NEAR(m.decoder().eval(1.0, x)(0, 0), 0.5, 1e-14);
}

TEST(Train, ZeroStepsKeepsInitialization) {
  auto cfg = tiny("full-sb");
  cfg.optimizer.steps = 0;
  const fs::path dir = scratch("zero");
  const auto r = train(cfg, dir);
  EXPECT_FALSE(r.aborted);
  const Model init = make_model(cfg, data::Standardization::identity(2));
  const Model saved = load_model(dir / "model.ckpt", cfg);
  EXPECT_EQ(saved.encoder_net->parameters(), init.encoder_net->parameters());
  EXPECT_EQ(saved.decoder_net->parameters(), init.decoder_net->parameters());
  const std::string loss = read_file(dir / "loss.csv");
  EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 2);
  EXPECT_EQ(loss.rfind("step,prior_term,drift_term,total,se\n", 0), 0u);
}

TEST(Train, ReproducibleAndSelfDescribing) {
  for (const char* mode : {"full-sb", "shifted-sb", "sbm"}) {
    const auto cfg = tiny(mode);
    const fs::path a = scratch(std::string("rep_a_") + mode), b = scratch(std::string("rep_b_") + mode);
    train(cfg, a);
    train(cfg, b);
    for (const char* f : {"loss.csv", "model.ckpt", "config.json", "checkpoints/step_00000002.ckpt"}) {
      EXPECT_EQ(read_file(a / f), read_file(b / f)) << mode << " " << f;
    }
    EXPECT_EQ(load_run_config(a).to_json(), cfg.to_json());
    const std::string manifest = read_file(a / "manifest.json");
    EXPECT_NE(manifest.find(cfg.hash()), std::string::npos);
    EXPECT_NE(manifest.find("checkpoints/step_00000002.ckpt"), std::string::npos);
  }
}

TEST(Train, AlternatingFreezesOneSide) {
  auto cfg = tiny("full-sb");
  cfg.optimizer.alternating = true;
  cfg.optimizer.alternate_every = 5;
  cfg.optimizer.steps = 2;
  const fs::path dir = scratch("alt");
  train(cfg, dir);
  const Model init = make_model(cfg, data::Standardization::identity(2));
  const Model saved = load_model(dir / "model.ckpt", cfg);
  EXPECT_EQ(saved.encoder_net->parameters(), init.encoder_net->parameters());
  EXPECT_FALSE(saved.decoder_net->parameters() == init.decoder_net->parameters());
}

TEST(Train, DivergenceKeepsLastGoodCheckpoint) {
  auto cfg = tiny("full-sb");
  cfg.optimizer.steps = 30;
  cfg.optimizer.lr = 1e6;
  cfg.optimizer.clip_norm = 0.0;
  cfg.optimizer.checkpoint_every = 1;
  const fs::path dir = scratch("nan");
  const auto r = train(cfg, dir);
  ASSERT_TRUE(r.aborted);
  EXPECT_LT(r.steps_done, 30);
  const Model saved = load_model(dir / "model.ckpt", cfg);
  EXPECT_EQ(saved.step, r.steps_done);
  if (r.steps_done > 0) {
    char name[40];
    std::snprintf(name, sizeof name, "step_%08ld.ckpt", r.steps_done);
    EXPECT_EQ(read_file(dir / "model.ckpt"), read_file(dir / "checkpoints" / name));
  }
}

TEST(Sample, OracleMomentsAndEmptyBatch) {
  auto cfg = tiny("sbm");
  cfg.oracle = true;
  cfg.dataset.kind = "gaussian";
  cfg.dataset.dim = 1;
  cfg.dataset.mean = {3.0};
  cfg.dataset.variance = 4.0;
  cfg.schedule.steps = 64;
  const Model m = make_model(cfg, data::generate(cfg.dataset, 0, 0).transform);
  auto sc = cfg.sampler_config();
  sc.n_samples = 20000;
  const Matrix x = generate_samples(m, cfg, sc);
  const double se = 1.0 / std::sqrt(20000.0);
  EXPECT_NEAR(x.mean(), 0.0, 3 * se);
  const Matrix raw = m.transform.invert(x);
  EXPECT_NEAR(raw.mean(), 3.0, 3 * 2 * se);
  sc.n_samples = 0;
  EXPECT_EQ(generate_samples(m, cfg, sc).rows(), 0);
}

TEST(Sample, ScoreFormNeedsAScore) {
  const auto cfg = tiny("full-sb");
  const Model m = make_model(cfg, data::Standardization::identity(2));
  auto sc = cfg.sampler_config();
  sc.n_samples = 4;
  sc.method = sampler::Method::PfOdeSbm;
  EXPECT_THROW(generate_samples(m, cfg, sc), ModeError);
  sc.method = sampler::Method::PfOdeSb;
  EXPECT_EQ(generate_samples(m, cfg, sc).rows(), 4);
}

TEST(Eval, SelfComparisonAndThresholds) {
  const auto cfg = tiny("full-sb");
  const Matrix x = data::generate(cfg.dataset, 400, 3).samples;
  EvalOptions o;
  o.max_sliced_w2 = 1e-12;
  const auto r = evaluate(x, x, cfg, nullptr, o);
  EXPECT_TRUE(r.pass);
  EXPECT_NE(r.json.find("\"sliced_w2\""), std::string::npos);
  o.max_sliced_w2 = 0.0;
  EXPECT_FALSE(evaluate(x + Matrix::Constant(400, 2, 0.5), x, cfg, nullptr, o).pass);
  EXPECT_THROW(evaluate(x, x.leftCols(1), cfg, nullptr, o), ShapeError);
}

TEST(Eval, ScoreMseForSbm) {
  auto cfg = tiny("sbm");
  const Model m = make_model(cfg, data::Standardization::identity(2));
  const Matrix x = data::generate(cfg.dataset, 100, 3).samples;
  const auto r = evaluate(x, x, cfg, &m, {});
  EXPECT_NE(r.json.find("\"score_mse\""), std::string::npos);
  EXPECT_EQ(r.json.find("\"prior_cross_entropy\""), std::string::npos);
}

TEST(Svg, WritesCircles) {
  const fs::path p = scratch("plot.svg");
  const Matrix x = Matrix::Constant(3, 2, 0.1);
  write_svg_scatter(p, x, &x);
  const std::string s = read_file(p);
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  std::size_t count = 0;
  for (auto pos = s.find("<circle"); pos != std::string::npos; pos = s.find("<circle", pos + 1)) ++count;
  EXPECT_EQ(count, 6u);
  EXPECT_THROW(write_svg_scatter(p, Matrix::Zero(2, 3)), ShapeError);
}

}  // namespace
}  // namespace sbvae::app
