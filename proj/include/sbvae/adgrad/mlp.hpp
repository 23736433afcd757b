// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/adgrad/parameters.hpp"
#include "sbvae/adgrad/tape.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sbvae::ad {

enum class Activation { Tanh, Softplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpSpec {
  int dim = 2;
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::Tanh;
  /// Prepend [t/T, sin(2 pi t/T), cos(2 pi t/T)] to the state.
  bool time_features = true;
  double horizon = 1.0;
  bool zero_final_layer = true;

  int input_width() const { return time_features ? dim + 3 : dim; }
  std::string to_json() const;
  static MlpSpec from_json(const std::string& text);
};

/// How the state-Jacobian trace is computed. Exact uses one tangent per
/// coordinate; Hutchinson averages v^T J v over Rademacher probes.
struct DivergenceOptions {
  bool hutchinson = false;
  int probes = 1;
  std::uint64_t seed = 0;
};

class Mlp;

/// An Mlp whose weights have been placed on a Tape as parameter leaves.
class BoundMlp {
 public:
  BoundMlp(const Mlp& net, Tape& tape);

  /// x is n x d; returns n x d.
  Var forward(double t, Var x) const;

  struct WithDivergence {
    Var out;
    Var divergence;  // n x 1
  };
  /// `probe_step` selects fresh Hutchinson probes per call site.
  WithDivergence forward_with_divergence(double t, Var x, const DivergenceOptions& opts = {},
                                         std::uint32_t probe_step = 0) const;

  /// d(root)/d(parameters) after tape.backward(root), in ParameterSet order.
  std::vector<double> gradient() const;
  /// Adds the gradient into `out` (length count()).
  void accumulate_gradient(std::span<double> out) const;

  const Mlp& net() const { return *net_; }

 private:
  const Mlp* net_;
  Tape* tape_;
  std::vector<Var> weights_;
  std::vector<Var> biases_;
};

/// Fully connected network realizing a time-dependent drift (t, x) -> R^d.
class Mlp {
 public:
  Mlp() = default;
  /// Glorot-uniform weights, zero biases; final layer zeroed when requested.
  static Mlp create(const MlpSpec& spec, std::uint64_t seed);
  static Mlp from_checkpoint(const Checkpoint& ck);

  const MlpSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::size_t layer_count() const { return spec_.hidden.size() + 1; }

  /// x is n x d; returns n x d.
  Matrix forward(double t, const Matrix& x) const;
  Vector forward(double t, const Vector& x) const;
  /// Trace of d out / d x for each row of x.
  Vector divergence(double t, const Matrix& x, const DivergenceOptions& opts = {},
                    std::uint32_t probe_step = 0) const;

  /// Time features for one t, as a 1 x 3 row.
  RowVector time_features(double t) const;

  BoundMlp bind(Tape& tape) const { return BoundMlp(*this, tape); }

  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path);

 private:
  friend class BoundMlp;
  Matrix input(double t, const Matrix& x) const;
  void check_input(const Matrix& x) const;

  MlpSpec spec_;
  ParameterSet params_;
  std::vector<std::size_t> weight_slots_;
  std::vector<std::size_t> bias_slots_;
};

/// Tangent seeds for the divergence: exact one-hot blocks or Rademacher probes.
/// Returns (p n) x d and the number of blocks p.
std::pair<Matrix, int> divergence_seeds(Eigen::Index n, int d, const DivergenceOptions& opts,
                                        std::uint32_t probe_step);

}  // namespace sbvae::ad
