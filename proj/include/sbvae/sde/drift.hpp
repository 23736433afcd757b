// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/adgrad/mlp.hpp"
#include "sbvae/sde/schedule.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sbvae::sde {

/// A time-state vector field (t, x) -> R^d evaluated on batches (one row per
/// sample). Value type; copies share the underlying definition.
class DriftField {
 public:
  enum class Kind { Linear, Mlp, Shifted, Callable };

  using EvalFn = std::function<Matrix(double, const Matrix&)>;
  using DivFn = std::function<Vector(double, const Matrix&)>;

  /// f(t, x) = A x + b.
  static DriftField linear(Matrix A, Vector b);
  static DriftField zero(int dim);
  static DriftField constant(Vector c);
  static DriftField mlp(std::shared_ptr<const ad::Mlp> net);
  /// base + sign * g(t)^2 * inner, with sign = +1 (encoder) or -1 (decoder).
  static DriftField shifted(DriftField base, DriftField inner, NoiseSchedule sched, double sign);
  /// Arbitrary analytic field; constant with respect to any tape.
  static DriftField callable(int dim, std::string name, EvalFn eval, DivFn div = {});
  /// this + constant vector c, keeping divergence when available.
  DriftField plus_constant(const Vector& c) const;

  Kind kind() const;
  int dim() const;
  std::string describe() const;

  Matrix eval(double t, const Matrix& x) const;
  Vector eval(double t, const Vector& x) const;
  bool has_divergence() const;
  Vector divergence(double t, const Matrix& x, const ad::DivergenceOptions& opts = {},
                    std::uint32_t probe_step = 0) const;

  /// Linear coefficients; throws ModeError for other kinds.
  const Matrix& linear_matrix() const;
  const Vector& linear_offset() const;
  /// Shifted components; throws ModeError for other kinds.
  const DriftField& shift_base() const;
  const DriftField& shift_inner() const;
  double shift_sign() const;
  const NoiseSchedule& shift_schedule() const;
  /// Network for Kind::Mlp; throws ModeError otherwise.
  const std::shared_ptr<const ad::Mlp>& network() const;

  /// Every network reachable from this field.
  std::vector<const ad::Mlp*> networks() const;

  struct Impl;

 private:
  explicit DriftField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// A DriftField whose networks are bound to a Tape, so evaluation records
/// differentiable nodes.
class TapedDrift {
 public:
  TapedDrift(const DriftField& field, ad::Tape& tape);

  ad::Var eval(double t, ad::Var x) const;

  struct WithDivergence {
    ad::Var out;
    ad::Var divergence;
  };
  WithDivergence eval_with_divergence(double t, ad::Var x, const ad::DivergenceOptions& opts = {},
                                      std::uint32_t probe_step = 0) const;

  /// Adds d(root)/d(params of `net`) into `out` after Tape::backward.
  void accumulate_gradient(const ad::Mlp& net, std::span<double> out) const;

 private:
  DriftField field_;
  ad::Tape* tape_;
  std::optional<ad::BoundMlp> bound_;
  std::vector<TapedDrift> children_;
};

}  // namespace sbvae::sde
