// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/common.hpp"

#include <cstdint>
#include <vector>

namespace sbvae::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  std::int32_t id = -1;
  Tape* tape = nullptr;

  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Append-only record of matrix-valued primitive operations for reverse-mode
/// differentiation. Operands always precede the nodes that use them, so a
/// single reverse sweep visits every node once.
class Tape {
 public:
  enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale,
    AddScalar,
    AddRow,
    MatMulNT,
    Tanh,
    TanhDeriv,
    Softplus,
    Sigmoid,
    SigmoidDeriv,
    Square,
    Sum,
    RowSum,
    HCat,
    VTile,
    FoldRows,
    RowLocal,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Matrix value);
  Var scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() root with respect to `v`; zero-filled if
  /// the root does not depend on `v`.
  Matrix grad(Var v) const;
  bool needs_grad(Var v) const;

  /// Reverse sweep from a 1x1 root. Clears previous gradients first.
  void backward(Var root);

  /// Drops all nodes; previously issued Vars become invalid.
  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Primitive constructors. Use the free functions below instead.
  Var push(Op op, Matrix value, Var a, Var b = {}, double scalar = 0.0, Matrix aux = {});

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Matrix aux;
    double scalar = 0.0;
    std::int32_t a = -1;
    std::int32_t b = -1;
    Op op = Op::Leaf;
    bool needs_grad = false;
    bool is_parameter = false;
  };

  void accumulate(std::int32_t id, const Matrix& g);
  template <class Expr>
  void accumulate_expr(std::int32_t id, const Expr& g);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise product.
Var operator*(Var a, Var b);
Var operator*(double s, Var a);
Var operator+(Var a, double s);

/// a * w^T, the dense-layer product with w stored as (out x in).
Var matmul_nt(Var a, Var w);
/// Adds a 1 x m row to every row of a.
Var add_row(Var a, Var row);
Var tanh(Var a);
/// 1 - h^2 for h = tanh(.), i.e. the derivative expressed in the output.
Var tanh_deriv(Var h);
Var softplus(Var a);
Var sigmoid(Var a);
/// s(1 - s) for s = sigmoid(.).
Var sigmoid_deriv(Var s);
Var square(Var a);
/// Sum of all entries; 1 x 1.
Var sum(Var a);
/// n x m -> n x 1.
Var row_sum(Var a);
Var hcat(Var a, Var b);
/// Stacks k copies of a vertically.
Var vtile(Var a, int k);
/// (k n) x m -> n x m, summing the k row blocks.
Var fold_rows(Var a, int k);
/// Rowwise scalar function whose value (n x 1) and input-gradient (n x m)
/// were computed outside the tape.
Var row_local(Var a, Matrix value, Matrix local_grad);

}  // namespace sbvae::ad
