// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/adgrad/tape.hpp"

#include <cmath>
#include <string>

namespace sbvae::ad {
namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& common_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw ContractError("tape: invalid variable");
  if (a.tape != b.tape) throw ContractError("tape: operands live on different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("tape: invalid variable");
  return *a.tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " + shape_of(b));
  }
}

inline double softplus_scalar(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<std::int32_t>(nodes_.size() - 1), this};
}

Var Tape::parameter(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  n.is_parameter = true;
  nodes_.push_back(std::move(n));
  return {static_cast<std::int32_t>(nodes_.size() - 1), this};
}

Var Tape::push(Op op, Matrix value, Var a, Var b, double scalar, Matrix aux) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.aux = std::move(aux);
  n.scalar = scalar;
  n.a = a.id;
  n.b = b.valid() ? b.id : -1;
  n.needs_grad = nodes_[static_cast<std::size_t>(a.id)].needs_grad ||
                 (n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].needs_grad);
  nodes_.push_back(std::move(n));
  return {static_cast<std::int32_t>(nodes_.size() - 1), this};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("tape: variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::clear() { nodes_.clear(); }

void Tape::accumulate(std::int32_t id, const Matrix& g) { accumulate_expr(id, g); }

template <class Expr>
void Tape::accumulate_expr(std::int32_t id, const Expr& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw ContractError("backward: root must be a scalar, got " + shape_of(r.value));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!r.needs_grad) return;
  nodes_[static_cast<std::size_t>(root.id)].grad = Matrix::Ones(1, 1);

  for (std::int32_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0 || n.op == Op::Leaf) continue;
    const Matrix& g = n.grad;
    const Matrix& av = nodes_[static_cast<std::size_t>(n.a)].value;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Sub:
        accumulate(n.a, g);
        accumulate_expr(n.b, -g);
        break;
      case Op::Mul: {
        const Matrix& bv = nodes_[static_cast<std::size_t>(n.b)].value;
        accumulate_expr(n.a, g.cwiseProduct(bv));
        accumulate_expr(n.b, g.cwiseProduct(av));
        break;
      }
      case Op::Scale:
        accumulate_expr(n.a, n.scalar * g);
        break;
      case Op::AddScalar:
        accumulate(n.a, g);
        break;
      case Op::AddRow:
        accumulate(n.a, g);
        accumulate_expr(n.b, g.colwise().sum());
        break;
      case Op::MatMulNT: {
        const Matrix& wv = nodes_[static_cast<std::size_t>(n.b)].value;
        if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) accumulate_expr(n.a, g * wv);
        if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
          accumulate_expr(n.b, g.transpose() * av);
        }
        break;
      }
      case Op::Tanh:
        accumulate_expr(n.a, g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::TanhDeriv:
        accumulate_expr(n.a, (-2.0 * g.array() * av.array()).matrix());
        break;
      case Op::Softplus:
        accumulate_expr(n.a, (g.array() * av.unaryExpr(&sigmoid_scalar).array()).matrix());
        break;
      case Op::Sigmoid:
        accumulate_expr(n.a,
                        (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Op::SigmoidDeriv:
        accumulate_expr(n.a, (g.array() * (1.0 - 2.0 * av.array())).matrix());
        break;
      case Op::Square:
        accumulate_expr(n.a, (2.0 * g.array() * av.array()).matrix());
        break;
      case Op::Sum:
        accumulate_expr(n.a, Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
        break;
      case Op::RowSum:
        accumulate_expr(n.a, g.replicate(1, av.cols()));
        break;
      case Op::HCat: {
        const Eigen::Index left = av.cols();
        accumulate_expr(n.a, g.leftCols(left));
        accumulate_expr(n.b, g.rightCols(g.cols() - left));
        break;
      }
      case Op::VTile: {
        const auto k = static_cast<Eigen::Index>(n.scalar);
        Matrix acc = g.topRows(av.rows());
        for (Eigen::Index j = 1; j < k; ++j) acc += g.middleRows(j * av.rows(), av.rows());
        accumulate(n.a, acc);
        break;
      }
      case Op::FoldRows: {
        const auto k = static_cast<Eigen::Index>(n.scalar);
        accumulate_expr(n.a, g.replicate(k, 1));
        break;
      }
      case Op::RowLocal:
        accumulate_expr(n.a, (n.aux.array().colwise() * g.col(0).array()).matrix());
        break;
    }
  }
}

Var operator+(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(t.value(a), t.value(b), "add");
  return t.push(Tape::Op::Add, t.value(a) + t.value(b), a, b);
}

Var operator-(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(t.value(a), t.value(b), "sub");
  return t.push(Tape::Op::Sub, t.value(a) - t.value(b), a, b);
}

Var operator*(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(t.value(a), t.value(b), "mul");
  return t.push(Tape::Op::Mul, t.value(a).cwiseProduct(t.value(b)), a, b);
}

Var operator*(double s, Var a) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::Scale, s * t.value(a), a, {}, s);
}

Var operator+(Var a, double s) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::AddScalar, (t.value(a).array() + s).matrix(), a, {}, s);
}

Var matmul_nt(Var a, Var w) {
  Tape& t = common_tape(a, w);
  const Matrix& av = t.value(a);
  const Matrix& wv = t.value(w);
  if (av.cols() != wv.cols()) {
    throw ShapeError("matmul_nt: inner dimension mismatch " + shape_of(av) + " * (" +
                     shape_of(wv) + ")^T");
  }
  return t.push(Tape::Op::MatMulNT, av * wv.transpose(), a, w);
}

Var add_row(Var a, Var row) {
  Tape& t = common_tape(a, row);
  const Matrix& av = t.value(a);
  const Matrix& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(av.cols()) + " row, got " +
                     shape_of(rv));
  }
  Matrix out = av.rowwise() + rv.row(0);
  return t.push(Tape::Op::AddRow, std::move(out), a, row);
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::Tanh, t.value(a).array().tanh().matrix(), a);
}

Var tanh_deriv(Var h) {
  Tape& t = tape_of(h);
  return t.push(Tape::Op::TanhDeriv, (1.0 - t.value(h).array().square()).matrix(), h);
}

Var softplus(Var a) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::Softplus, t.value(a).unaryExpr(&softplus_scalar), a);
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::Sigmoid, t.value(a).unaryExpr(&sigmoid_scalar), a);
}

Var sigmoid_deriv(Var s) {
  Tape& t = tape_of(s);
  const Matrix& v = t.value(s);
  return t.push(Tape::Op::SigmoidDeriv, (v.array() * (1.0 - v.array())).matrix(), s);
}

Var square(Var a) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::Square, t.value(a).array().square().matrix(), a);
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::Sum, Matrix::Constant(1, 1, t.value(a).sum()), a);
}

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  return t.push(Tape::Op::RowSum, t.value(a).rowwise().sum(), a);
}

Var hcat(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.rows() != bv.rows()) {
    throw ShapeError("hcat: row mismatch " + shape_of(av) + " vs " + shape_of(bv));
  }
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  return t.push(Tape::Op::HCat, std::move(out), a, b);
}

Var vtile(Var a, int k) {
  if (k < 1) throw ContractError("vtile: k must be positive");
  Tape& t = tape_of(a);
  return t.push(Tape::Op::VTile, t.value(a).replicate(k, 1), a, {}, static_cast<double>(k));
}

Var fold_rows(Var a, int k) {
  if (k < 1) throw ContractError("fold_rows: k must be positive");
  Tape& t = tape_of(a);
  const Matrix& av = t.value(a);
  if (av.rows() % k != 0) {
    throw ShapeError("fold_rows: " + std::to_string(av.rows()) + " rows not divisible by " +
                     std::to_string(k));
  }
  const Eigen::Index n = av.rows() / k;
  Matrix out = av.topRows(n);
  for (Eigen::Index j = 1; j < k; ++j) out += av.middleRows(j * n, n);
  return t.push(Tape::Op::FoldRows, std::move(out), a, {}, static_cast<double>(k));
}

Var row_local(Var a, Matrix value, Matrix local_grad) {
  Tape& t = tape_of(a);
  const Matrix& av = t.value(a);
  if (value.rows() != av.rows() || value.cols() != 1) {
    throw ShapeError("row_local: value must be " + std::to_string(av.rows()) + "x1");
  }
  require_same_shape(local_grad, av, "row_local");
  return t.push(Tape::Op::RowLocal, std::move(value), a, {}, 0.0, std::move(local_grad));
}

}  // namespace sbvae::ad
