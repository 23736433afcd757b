// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/sde/drift.hpp"

#include <sstream>
#include <variant>

namespace sbvae::sde {

struct LinearPart {
  Matrix A;
  Vector b;
};

struct MlpPart {
  std::shared_ptr<const ad::Mlp> net;
};

struct ShiftedPart {
  DriftField base;
  DriftField inner;
  NoiseSchedule sched;
  double sign;
};

struct CallablePart {
  int dim;
  std::string name;
  DriftField::EvalFn eval;
  DriftField::DivFn div;
};

struct DriftField::Impl {
  std::variant<LinearPart, MlpPart, ShiftedPart, CallablePart> part;
};

namespace {

void check_state(int dim, const Matrix& x, const std::string& who) {
  if (x.cols() != dim) {
    throw ShapeError(who + ": expected state dimension " + std::to_string(dim) + ", got " +
                     std::to_string(x.cols()));
  }
}

}  // namespace

DriftField DriftField::linear(Matrix A, Vector b) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    throw ShapeError("linear drift: A must be d x d and b length d");
  }
  return DriftField(std::make_shared<const Impl>(Impl{LinearPart{std::move(A), std::move(b)}}));
}

DriftField DriftField::zero(int dim) {
  return linear(Matrix::Zero(dim, dim), Vector::Zero(dim));
}

DriftField DriftField::constant(Vector c) {
  const auto d = c.size();
  return linear(Matrix::Zero(d, d), std::move(c));
}

DriftField DriftField::mlp(std::shared_ptr<const ad::Mlp> net) {
  if (!net) throw ContractError("mlp drift: null network");
  return DriftField(std::make_shared<const Impl>(Impl{MlpPart{std::move(net)}}));
}

DriftField DriftField::shifted(DriftField base, DriftField inner, NoiseSchedule sched,
                               double sign) {
  if (base.dim() != inner.dim()) throw ShapeError("shifted drift: dimension mismatch");
  if (sign != 1.0 && sign != -1.0) throw ContractError("shifted drift: sign must be +1 or -1");
  return DriftField(std::make_shared<const Impl>(
      Impl{ShiftedPart{std::move(base), std::move(inner), sched, sign}}));
}

DriftField DriftField::callable(int dim, std::string name, EvalFn eval, DivFn div) {
  if (!eval) throw ContractError("callable drift: missing evaluator");
  return DriftField(std::make_shared<const Impl>(
      Impl{CallablePart{dim, std::move(name), std::move(eval), std::move(div)}}));
}

DriftField DriftField::plus_constant(const Vector& c) const {
  if (c.size() != dim()) throw ShapeError("plus_constant: dimension mismatch");
  if (kind() == Kind::Linear) return linear(linear_matrix(), linear_offset() + c);
  const DriftField self = *this;
  DivFn div;
  if (has_divergence()) {
    div = [self](double t, const Matrix& x) { return self.divergence(t, x); };
  }
  return callable(
      dim(), describe() + " + c",
      [self, c](double t, const Matrix& x) {
        Matrix out = self.eval(t, x);
        out.rowwise() += c.transpose();
        return out;
      },
      std::move(div));
}

DriftField::Kind DriftField::kind() const {
  return static_cast<Kind>(impl_->part.index());
}

int DriftField::dim() const {
  return std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearPart>) return static_cast<int>(p.b.size());
        if constexpr (std::is_same_v<T, MlpPart>) return p.net->dim();
        if constexpr (std::is_same_v<T, ShiftedPart>) return p.base.dim();
        if constexpr (std::is_same_v<T, CallablePart>) return p.dim;
      },
      impl_->part);
}

std::string DriftField::describe() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearPart>) return "linear";
        if constexpr (std::is_same_v<T, MlpPart>) return "mlp";
        if constexpr (std::is_same_v<T, ShiftedPart>) {
          return "shifted(" + p.base.describe() + (p.sign > 0 ? " + " : " - ") + "g^2 " +
                 p.inner.describe() + ")";
        }
        if constexpr (std::is_same_v<T, CallablePart>) return p.name;
      },
      impl_->part);
}

Matrix DriftField::eval(double t, const Matrix& x) const {
  check_state(dim(), x, "drift " + describe());
  return std::visit(
      [&](const auto& p) -> Matrix {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearPart>) {
          Matrix out = x * p.A.transpose();
          out.rowwise() += p.b.transpose();
          return out;
        }
        if constexpr (std::is_same_v<T, MlpPart>) return p.net->forward(t, x);
        if constexpr (std::is_same_v<T, ShiftedPart>) {
          return p.base.eval(t, x) + (p.sign * p.sched.g2(t)) * p.inner.eval(t, x);
        }
        if constexpr (std::is_same_v<T, CallablePart>) return p.eval(t, x);
      },
      impl_->part);
}

Vector DriftField::eval(double t, const Vector& x) const {
  return eval(t, Matrix(x.transpose())).row(0).transpose();
}

bool DriftField::has_divergence() const {
  return std::visit(
      [](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ShiftedPart>) {
          return p.base.has_divergence() && p.inner.has_divergence();
        }
        if constexpr (std::is_same_v<T, CallablePart>) return static_cast<bool>(p.div);
        return true;
      },
      impl_->part);
}

Vector DriftField::divergence(double t, const Matrix& x, const ad::DivergenceOptions& opts,
                              std::uint32_t probe_step) const {
  check_state(dim(), x, "divergence of " + describe());
  return std::visit(
      [&](const auto& p) -> Vector {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearPart>) {
          return Vector::Constant(x.rows(), p.A.trace());
        }
        if constexpr (std::is_same_v<T, MlpPart>) return p.net->divergence(t, x, opts, probe_step);
        if constexpr (std::is_same_v<T, ShiftedPart>) {
          return p.base.divergence(t, x, opts, probe_step) +
                 (p.sign * p.sched.g2(t)) * p.inner.divergence(t, x, opts, probe_step);
        }
        if constexpr (std::is_same_v<T, CallablePart>) {
          if (!p.div) throw ModeError("drift '" + p.name + "' has no divergence");
          return p.div(t, x);
        }
      },
      impl_->part);
}

const Matrix& DriftField::linear_matrix() const {
  if (const auto* p = std::get_if<LinearPart>(&impl_->part)) return p->A;
  throw ModeError("drift " + describe() + " is not linear");
}

const Vector& DriftField::linear_offset() const {
  if (const auto* p = std::get_if<LinearPart>(&impl_->part)) return p->b;
  throw ModeError("drift " + describe() + " is not linear");
}

const DriftField& DriftField::shift_base() const {
  if (const auto* p = std::get_if<ShiftedPart>(&impl_->part)) return p->base;
  throw ModeError("drift " + describe() + " is not shifted");
}

const DriftField& DriftField::shift_inner() const {
  if (const auto* p = std::get_if<ShiftedPart>(&impl_->part)) return p->inner;
  throw ModeError("drift " + describe() + " is not shifted");
}

double DriftField::shift_sign() const {
  if (const auto* p = std::get_if<ShiftedPart>(&impl_->part)) return p->sign;
  throw ModeError("drift " + describe() + " is not shifted");
}

const NoiseSchedule& DriftField::shift_schedule() const {
  if (const auto* p = std::get_if<ShiftedPart>(&impl_->part)) return p->sched;
  throw ModeError("drift " + describe() + " is not shifted");
}

const std::shared_ptr<const ad::Mlp>& DriftField::network() const {
  if (const auto* p = std::get_if<MlpPart>(&impl_->part)) return p->net;
  throw ModeError("drift " + describe() + " is not a network");
}

std::vector<const ad::Mlp*> DriftField::networks() const {
  std::vector<const ad::Mlp*> out;
  if (const auto* p = std::get_if<MlpPart>(&impl_->part)) out.push_back(p->net.get());
  if (const auto* p = std::get_if<ShiftedPart>(&impl_->part)) {
    for (const auto* n : p->base.networks()) out.push_back(n);
    for (const auto* n : p->inner.networks()) out.push_back(n);
  }
  return out;
}

TapedDrift::TapedDrift(const DriftField& field, ad::Tape& tape) : field_(field), tape_(&tape) {
  switch (field.kind()) {
    case DriftField::Kind::Mlp:
      bound_.emplace(*field.network(), tape);
      break;
    case DriftField::Kind::Shifted:
      children_.emplace_back(field.shift_base(), tape);
      children_.emplace_back(field.shift_inner(), tape);
      break;
    default:
      break;
  }
}

ad::Var TapedDrift::eval(double t, ad::Var x) const {
  switch (field_.kind()) {
    case DriftField::Kind::Linear: {
      check_state(field_.dim(), tape_->value(x), "drift linear");
      ad::Var out = ad::matmul_nt(x, tape_->constant(field_.linear_matrix()));
      return ad::add_row(out, tape_->constant(field_.linear_offset().transpose()));
    }
    case DriftField::Kind::Mlp:
      return bound_->forward(t, x);
    case DriftField::Kind::Shifted: {
      const double w = field_.shift_sign() * field_.shift_schedule().g2(t);
      return children_[0].eval(t, x) + w * children_[1].eval(t, x);
    }
    case DriftField::Kind::Callable:
      if (tape_->needs_grad(x)) {
        throw ContractError("drift '" + field_.describe() +
                            "' is analytic and cannot propagate gradients through its input");
      }
      return tape_->constant(field_.eval(t, tape_->value(x)));
  }
  throw ContractError("unreachable drift kind");
}

TapedDrift::WithDivergence TapedDrift::eval_with_divergence(double t, ad::Var x,
                                                            const ad::DivergenceOptions& opts,
                                                            std::uint32_t probe_step) const {
  switch (field_.kind()) {
    case DriftField::Kind::Linear: {
      const Eigen::Index n = tape_->value(x).rows();
      return {eval(t, x), tape_->constant(Matrix::Constant(n, 1, field_.linear_matrix().trace()))};
    }
    case DriftField::Kind::Mlp: {
      auto r = bound_->forward_with_divergence(t, x, opts, probe_step);
      return {r.out, r.divergence};
    }
    case DriftField::Kind::Shifted: {
      const double w = field_.shift_sign() * field_.shift_schedule().g2(t);
      auto base = children_[0].eval_with_divergence(t, x, opts, probe_step);
      auto inner = children_[1].eval_with_divergence(t, x, opts, probe_step);
      return {base.out + w * inner.out, base.divergence + w * inner.divergence};
    }
    case DriftField::Kind::Callable: {
      ad::Var out = eval(t, x);
      return {out, tape_->constant(Matrix(field_.divergence(t, tape_->value(x))))};
    }
  }
  throw ContractError("unreachable drift kind");
}

void TapedDrift::accumulate_gradient(const ad::Mlp& net, std::span<double> out) const {
  if (bound_ && &bound_->net() == &net) bound_->accumulate_gradient(out);
  for (const auto& c : children_) c.accumulate_gradient(net, out);
}

}  // namespace sbvae::sde
