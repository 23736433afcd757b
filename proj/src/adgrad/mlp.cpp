// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/adgrad/mlp.hpp"

#include "sbvae/random.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>

namespace sbvae::ad {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;

ConstMap view(const ParameterSet& p, std::size_t slot) {
  const LayerSlot& l = p.layers()[slot];
  return ConstMap(p.values().data() + l.offset, l.rows, l.cols);
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "softplus"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "softplus") return Activation::Softplus;
  throw ConfigError("unknown activation '" + s + "' (expected tanh or softplus)");
}

std::string MlpSpec::to_json() const {
  nlohmann::json j = {{"dim", dim},
                      {"hidden", hidden},
                      {"activation", ad::to_string(activation)},
                      {"time_features", time_features},
                      {"horizon", horizon},
                      {"zero_final_layer", zero_final_layer}};
  return j.dump();
}

MlpSpec MlpSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MlpSpec s;
  s.dim = j.at("dim").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.time_features = j.at("time_features").get<bool>();
  s.horizon = j.at("horizon").get<double>();
  s.zero_final_layer = j.value("zero_final_layer", true);
  return s;
}

std::pair<Matrix, int> divergence_seeds(Eigen::Index n, int d, const DivergenceOptions& opts,
                                        std::uint32_t probe_step) {
  if (!opts.hutchinson) {
    Matrix seeds = Matrix::Zero(n * d, d);
    for (int k = 0; k < d; ++k) seeds.block(k * n, k, n, 1).setOnes();
    return {std::move(seeds), d};
  }
  if (opts.probes < 1) throw ContractError("divergence: Hutchinson needs at least one probe");
  const CounterRng rng(opts.seed);
  Matrix seeds(n * opts.probes, d);
  for (Eigen::Index r = 0; r < seeds.rows(); ++r) {
    for (int c = 0; c < d; ++c) {
      seeds(r, c) = rng.uniform(static_cast<std::uint64_t>(r), probe_step,
                                static_cast<std::uint32_t>(c)) < 0.5
                        ? -1.0
                        : 1.0;
    }
  }
  return {std::move(seeds), opts.probes};
}

Mlp Mlp::create(const MlpSpec& spec, std::uint64_t seed) {
  if (spec.dim < 1) throw ContractError("Mlp: dimension must be positive");
  for (int w : spec.hidden) {
    if (w < 1) throw ContractError("Mlp: hidden widths must be positive");
  }
  Mlp net;
  net.spec_ = spec;
  int in = spec.input_width();
  std::vector<int> widths = spec.hidden;
  widths.push_back(spec.dim);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string base = "layer" + std::to_string(i);
    net.weight_slots_.push_back(net.params_.add(base + ".weight", widths[i], in));
    net.bias_slots_.push_back(net.params_.add(base + ".bias", 1, widths[i]));
    in = widths[i];
  }

  RngStream rng(derive_seed(seed, 0x6D6C70), 0);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    const LayerSlot& l = net.params_.layers()[net.weight_slots_[i]];
    const double limit = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
    auto values = net.params_.values();
    for (std::size_t k = 0; k < l.size(); ++k) {
      const double u = rng.uniform();
      values[l.offset + k] = (last && spec.zero_final_layer) ? 0.0 : limit * (2.0 * u - 1.0);
    }
  }
  return net;
}

Mlp Mlp::from_checkpoint(const Checkpoint& ck) {
  const auto meta = nlohmann::json::parse(ck.metadata_json);
  if (!meta.contains("mlp")) throw IoError("checkpoint does not describe an MLP");
  Mlp net = create(MlpSpec::from_json(meta["mlp"].dump()), 0);
  if (net.params_.count() != ck.params.count()) {
    throw ShapeError("checkpoint parameter count " + std::to_string(ck.params.count()) +
                     " does not match architecture (" + std::to_string(net.params_.count()) + ")");
  }
  for (std::size_t i = 0; i < net.params_.layers().size(); ++i) {
    const auto& a = net.params_.layers()[i];
    const auto& b = ck.params.layers()[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) {
      throw ShapeError("checkpoint layer '" + b.name + "' does not match architecture");
    }
  }
  net.params_ = ck.params;
  return net;
}

void Mlp::save(const std::filesystem::path& path) const {
  const std::string meta = nlohmann::json{{"mlp", nlohmann::json::parse(spec_.to_json())}}.dump();
  write_checkpoint(path, params_, meta);
}

Mlp Mlp::load(const std::filesystem::path& path) { return from_checkpoint(read_checkpoint(path)); }

RowVector Mlp::time_features(double t) const {
  const double s = t / spec_.horizon;
  RowVector f(3);
  f << s, std::sin(2.0 * std::numbers::pi * s), std::cos(2.0 * std::numbers::pi * s);
  return f;
}

void Mlp::check_input(const Matrix& x) const {
  if (x.cols() != spec_.dim) {
    throw ShapeError("Mlp: expected state dimension " + std::to_string(spec_.dim) + ", got " +
                     std::to_string(x.cols()));
  }
}

Matrix Mlp::input(double t, const Matrix& x) const {
  check_input(x);
  if (!spec_.time_features) return x;
  Matrix z(x.rows(), x.cols() + 3);
  z.leftCols(3) = time_features(t).replicate(x.rows(), 1);
  z.rightCols(x.cols()) = x;
  return z;
}

Matrix Mlp::forward(double t, const Matrix& x) const {
  Matrix h = input(t, x);
  const std::size_t layers = layer_count();
  for (std::size_t i = 0; i < layers; ++i) {
    Matrix a = h * view(params_, weight_slots_[i]).transpose();
    a.rowwise() += view(params_, bias_slots_[i]).row(0);
    if (i + 1 < layers) {
      h = spec_.activation == Activation::Tanh ? Matrix(a.array().tanh())
                                               : Matrix(a.unaryExpr(&softplus_scalar));
    } else {
      h = std::move(a);
    }
  }
  return h;
}

Vector Mlp::forward(double t, const Vector& x) const {
  return forward(t, Matrix(x.transpose())).row(0).transpose();
}

Vector Mlp::divergence(double t, const Matrix& x, const DivergenceOptions& opts,
                       std::uint32_t probe_step) const {
  const Eigen::Index n = x.rows();
  const int d = spec_.dim;
  auto [seeds, blocks] = divergence_seeds(n, d, opts, probe_step);

  Matrix h = input(t, x);
  Matrix tangent(seeds.rows(), h.cols());
  tangent.setZero();
  tangent.rightCols(d) = seeds;

  const std::size_t layers = layer_count();
  for (std::size_t i = 0; i < layers; ++i) {
    const auto w = view(params_, weight_slots_[i]);
    Matrix a = h * w.transpose();
    a.rowwise() += view(params_, bias_slots_[i]).row(0);
    Matrix ta = tangent * w.transpose();
    if (i + 1 < layers) {
      Matrix deriv;
      if (spec_.activation == Activation::Tanh) {
        h = a.array().tanh();
        deriv = 1.0 - h.array().square();
      } else {
        h = a.unaryExpr(&softplus_scalar);
        deriv = a.unaryExpr(&sigmoid_scalar);
      }
      tangent = ta.cwiseProduct(deriv.replicate(blocks, 1));
    } else {
      tangent = std::move(ta);
    }
  }
  const Matrix projected = tangent.cwiseProduct(seeds);
  Vector div = Vector::Zero(n);
  for (int k = 0; k < blocks; ++k) div += projected.middleRows(k * n, n).rowwise().sum();
  if (opts.hutchinson) div /= static_cast<double>(blocks);
  return div;
}

BoundMlp::BoundMlp(const Mlp& net, Tape& tape) : net_(&net), tape_(&tape) {
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    weights_.push_back(tape.parameter(net.params_.block(net.weight_slots_[i])));
    biases_.push_back(tape.parameter(net.params_.block(net.bias_slots_[i])));
  }
}

Var BoundMlp::forward(double t, Var x) const {
  net_->check_input(tape_->value(x));
  Var h = x;
  if (net_->spec_.time_features) {
    const Eigen::Index n = tape_->value(x).rows();
    h = hcat(tape_->constant(net_->time_features(t).replicate(n, 1)), x);
  }
  const std::size_t layers = weights_.size();
  for (std::size_t i = 0; i < layers; ++i) {
    Var a = add_row(matmul_nt(h, weights_[i]), biases_[i]);
    if (i + 1 < layers) {
      h = net_->spec_.activation == Activation::Tanh ? ad::tanh(a) : softplus(a);
    } else {
      h = a;
    }
  }
  return h;
}

BoundMlp::WithDivergence BoundMlp::forward_with_divergence(double t, Var x,
                                                           const DivergenceOptions& opts,
                                                           std::uint32_t probe_step) const {
  net_->check_input(tape_->value(x));
  const Eigen::Index n = tape_->value(x).rows();
  const int d = net_->spec_.dim;
  auto [seeds, blocks] = divergence_seeds(n, d, opts, probe_step);

  Var h = x;
  Matrix tangent_in = Matrix::Zero(seeds.rows(), net_->spec_.input_width());
  tangent_in.rightCols(d) = seeds;
  if (net_->spec_.time_features) {
    h = hcat(tape_->constant(net_->time_features(t).replicate(n, 1)), x);
  }
  Var tangent = tape_->constant(std::move(tangent_in));

  const std::size_t layers = weights_.size();
  for (std::size_t i = 0; i < layers; ++i) {
    Var a = add_row(matmul_nt(h, weights_[i]), biases_[i]);
    Var ta = matmul_nt(tangent, weights_[i]);
    if (i + 1 < layers) {
      Var deriv;
      if (net_->spec_.activation == Activation::Tanh) {
        h = ad::tanh(a);
        deriv = tanh_deriv(h);
      } else {
        h = softplus(a);
        deriv = sigmoid(a);
      }
      tangent = ta * (blocks == 1 ? deriv : vtile(deriv, blocks));
    } else {
      h = a;
      tangent = ta;
    }
  }
  Var div = row_sum(fold_rows(tangent * tape_->constant(std::move(seeds)), blocks));
  if (opts.hutchinson) div = (1.0 / blocks) * div;
  return {h, div};
}

void BoundMlp::accumulate_gradient(std::span<double> out) const {
  const ParameterSet& p = net_->params_;
  if (out.size() != p.count()) throw ShapeError("BoundMlp: gradient buffer has wrong length");
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    for (auto [var, slot] : {std::pair{weights_[i], net_->weight_slots_[i]},
                             std::pair{biases_[i], net_->bias_slots_[i]}}) {
      const Matrix g = tape_->grad(var);
      const LayerSlot& l = p.layers()[slot];
      for (Eigen::Index r = 0; r < l.rows; ++r) {
        for (Eigen::Index c = 0; c < l.cols; ++c) {
          out[l.offset + static_cast<std::size_t>(r * l.cols + c)] += g(r, c);
        }
      }
    }
  }
}

std::vector<double> BoundMlp::gradient() const {
  std::vector<double> g(net_->params_.count(), 0.0);
  accumulate_gradient(g);
  return g;
}

}  // namespace sbvae::ad
