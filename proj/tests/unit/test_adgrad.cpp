// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/adgrad/adam.hpp"
#include "sbvae/adgrad/mlp.hpp"
#include "sbvae/adgrad/parameters.hpp"
#include "sbvae/adgrad/tape.hpp"
#include "sbvae/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>

namespace sbvae::ad {
namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  return CounterRng(seed).normal_matrix(0, 0, r, c);
}

std::size_t slot_of(const ParameterSet& p, const std::string& name) {
  for (std::size_t i = 0; i < p.layers().size(); ++i) {
    if (p.layers()[i].name == name) return i;
  }
  throw std::runtime_error("no layer " + name);
}

// Central differences of f with respect to every entry of x0.
Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x0,
                         double h = 1e-5) {
  Matrix g(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Matrix xp = x0, xm = x0;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    g.data()[i] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

double rel_error(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

TEST(Tape, SquareGradient) {
  Tape tape;
  Var p = tape.parameter(Matrix::Constant(1, 1, 3.0));
  tape.backward(sum(square(p)));
  EXPECT_DOUBLE_EQ(tape.grad(p)(0, 0), 6.0);
}

TEST(Tape, NonScalarRootRejected) {
  Tape tape;
  Var p = tape.parameter(Matrix::Ones(2, 1));
  EXPECT_THROW(tape.backward(square(p)), ContractError);
}

TEST(Tape, ShapeMismatchRejected) {
  Tape tape;
  Var a = tape.parameter(Matrix::Ones(2, 3));
  Var b = tape.parameter(Matrix::Ones(3, 2));
  EXPECT_THROW(a + b, ShapeError);
  EXPECT_THROW(matmul_nt(a, b), ShapeError);
}

// Each unary op, weighted by a fixed random matrix so every entry matters.
TEST(Tape, UnaryOpsMatchFiniteDifferences) {
  using Unary = std::function<Var(Var)>;
  const std::vector<std::pair<std::string, Unary>> ops = {
      {"tanh", [](Var a) { return tanh(a); }},
      {"tanh_deriv", [](Var a) { return tanh_deriv(tanh(a)); }},
      {"softplus", [](Var a) { return softplus(a); }},
      {"sigmoid", [](Var a) { return sigmoid(a); }},
      {"sigmoid_deriv", [](Var a) { return sigmoid_deriv(sigmoid(a)); }},
      {"square", [](Var a) { return square(a); }},
      {"scale_shift", [](Var a) { return 2.5 * a + 0.3; }},
      {"row_sum", [](Var a) { return hcat(row_sum(a), row_sum(a)); }},
      {"vtile_fold", [](Var a) { return fold_rows(vtile(a, 3), 3); }},
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Matrix x0 = random_matrix(4, 3, seed);
    const Matrix w = random_matrix(4, 3, seed + 1000);
    for (const auto& [name, op] : ops) {
      auto value = [&](const Matrix& x) {
        Tape t;
        Var out = op(t.constant(x));
        const Matrix& v = t.value(out);
        return (v.array() * w.leftCols(v.cols()).topRows(v.rows()).array()).sum();
      };
      Tape tape;
      Var x = tape.parameter(x0);
      Var out = op(x);
      const Matrix& v = tape.value(out);
      tape.backward(sum(out * tape.constant(w.leftCols(v.cols()).topRows(v.rows()))));
      EXPECT_LE(rel_error(tape.grad(x), finite_difference(value, x0)), 1e-5)
          << name << " seed " << seed;
    }
  }
}

TEST(Tape, BinaryOpsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Matrix a0 = random_matrix(5, 3, seed);
    const Matrix w0 = random_matrix(4, 3, seed + 7);
    const Matrix r0 = random_matrix(1, 4, seed + 11);
    auto build = [&](Tape& t, Var a, Var w, Var r) {
      Var z = add_row(matmul_nt(a, w), r);
      Var y = hcat(z * z, z - tanh(z));
      return sum(y + y * z.tape->constant(Matrix::Constant(5, 8, 0.5)));
    };
    Tape tape;
    Var a = tape.parameter(a0), w = tape.parameter(w0), r = tape.parameter(r0);
    tape.backward(build(tape, a, w, r));
    auto f_a = [&](const Matrix& x) {
      Tape t;
      return t.value(build(t, t.constant(x), t.constant(w0), t.constant(r0)))(0, 0);
    };
    auto f_w = [&](const Matrix& x) {
      Tape t;
      return t.value(build(t, t.constant(a0), t.constant(x), t.constant(r0)))(0, 0);
    };
    auto f_r = [&](const Matrix& x) {
      Tape t;
      return t.value(build(t, t.constant(a0), t.constant(w0), t.constant(x)))(0, 0);
    };
    EXPECT_LE(rel_error(tape.grad(a), finite_difference(f_a, a0)), 1e-5) << seed;
    EXPECT_LE(rel_error(tape.grad(w), finite_difference(f_w, w0)), 1e-5) << seed;
    EXPECT_LE(rel_error(tape.grad(r), finite_difference(f_r, r0)), 1e-5) << seed;
  }
}

TEST(Tape, RowLocalUsesSuppliedGradient) {
  Tape tape;
  const Matrix x0 = random_matrix(3, 2, 5);
  Var x = tape.parameter(x0);
  // f(x) = 0.5 |x|^2 per row.
  const Matrix value = 0.5 * x0.rowwise().squaredNorm();
  tape.backward(sum(row_local(x, value, x0)));
  EXPECT_LE((tape.grad(x) - x0).norm(), 1e-15);
}

TEST(Tape, ReusableAfterClear) {
  Tape tape;
  Var p = tape.parameter(Matrix::Constant(1, 1, 2.0));
  tape.backward(sum(square(p)));
  tape.clear();
  EXPECT_EQ(tape.size(), 0u);
  Var q = tape.parameter(Matrix::Constant(1, 1, -1.0));
  tape.backward(sum(square(q)));
  EXPECT_DOUBLE_EQ(tape.grad(q)(0, 0), -2.0);
}

MlpSpec small_spec(int dim, std::vector<int> hidden, bool zero_final = false) {
  MlpSpec s;
  s.dim = dim;
  s.hidden = std::move(hidden);
  s.zero_final_layer = zero_final;
  return s;
}

TEST(Mlp, ZeroFinalLayerGivesZeroDrift) {
  const Mlp net = Mlp::create(small_spec(2, {16, 16}, true), 3);
  const Matrix x = random_matrix(5, 2, 1);
  EXPECT_EQ(net.forward(0.3, x).norm(), 0.0);
}

TEST(Mlp, IdentityLayer) {
  MlpSpec s = small_spec(2, {});
  s.time_features = false;
  Mlp net = Mlp::create(s, 0);
  net.parameters().set_block(slot_of(net.parameters(), "layer0.weight"), Matrix::Identity(2, 2));
  net.parameters().set_block(slot_of(net.parameters(), "layer0.bias"), Matrix::Zero(1, 2));
  const Vector out = net.forward(0.7, Vector{{1.0, 2.0}});
  EXPECT_DOUBLE_EQ(out(0), 1.0);
  EXPECT_DOUBLE_EQ(out(1), 2.0);
}

TEST(Mlp, MatchesHandRolledEvaluation) {
  const Mlp net = Mlp::create(small_spec(2, {8, 8}), 42);
  const ParameterSet& p = net.parameters();
  const double t = 0.5;
  const double pi = 3.14159265358979323846;
  std::vector<double> a = {t, std::sin(2 * pi * t), std::cos(2 * pi * t), 0.1, -0.3};
  for (int layer = 0; layer < 3; ++layer) {
    const Matrix W = p.block(slot_of(p, "layer" + std::to_string(layer) + ".weight"));
    const Matrix b = p.block(slot_of(p, "layer" + std::to_string(layer) + ".bias"));
    std::vector<double> next(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index o = 0; o < W.rows(); ++o) {
      double acc = b(0, o);
      for (Eigen::Index i = 0; i < W.cols(); ++i) acc += W(o, i) * a[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = layer < 2 ? std::tanh(acc) : acc;
    }
    a = next;
  }
  const Vector out = net.forward(t, Vector{{0.1, -0.3}});
  EXPECT_NEAR(out(0), a[0], 1e-14);
  EXPECT_NEAR(out(1), a[1], 1e-14);
}

TEST(Mlp, BiasAndLastLayerGradientsByHand) {
  Mlp net = Mlp::create(small_spec(2, {4}), 9);
  ParameterSet& p = net.parameters();
  const Matrix b0 = random_matrix(1, 4, 17);
  p.set_block(slot_of(p, "layer0.weight"), Matrix::Zero(4, 5));
  p.set_block(slot_of(p, "layer0.bias"), b0);
  p.set_block(slot_of(p, "layer1.weight"), Matrix::Zero(2, 4));
  p.set_block(slot_of(p, "layer1.bias"), Matrix::Constant(1, 2, 0.4));
  Tape tape;
  const BoundMlp bound = net.bind(tape);
  tape.backward(sum(bound.forward(0.2, tape.constant(random_matrix(1, 2, 3)))));
  const std::vector<double> g = bound.gradient();
  const LayerSlot& w1 = p.layer("layer1.weight");
  const LayerSlot& bias1 = p.layer("layer1.bias");
  const LayerSlot& bias0 = p.layer("layer0.bias");
  for (Eigen::Index o = 0; o < 2; ++o) {
    EXPECT_DOUBLE_EQ(g[bias1.offset + static_cast<std::size_t>(o)], 1.0);
    for (Eigen::Index j = 0; j < 4; ++j) {
      EXPECT_NEAR(g[w1.offset + static_cast<std::size_t>(o * 4 + j)], std::tanh(b0(0, j)), 1e-15);
    }
  }
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(g[bias0.offset + j], 0.0);
}

// Loss mixes outputs and the on-tape divergence so both paths are checked.
double mlp_loss(const Mlp& net, const Matrix& x) {
  Tape tape;
  const BoundMlp bound = net.bind(tape);
  auto r = bound.forward_with_divergence(0.35, tape.constant(x));
  return tape.value(sum(square(r.out)))(0, 0) + tape.value(sum(r.divergence))(0, 0);
}

TEST(Mlp, ParameterGradientsMatchFiniteDifferences) {
  for (Activation act : {Activation::Tanh, Activation::Softplus}) {
    MlpSpec s = small_spec(2, {6, 5});
    s.activation = act;
    Mlp net = Mlp::create(s, 5);
    const Matrix x = random_matrix(3, 2, 8);
    Tape tape;
    const BoundMlp bound = net.bind(tape);
    auto r = bound.forward_with_divergence(0.35, tape.constant(x));
    tape.backward(sum(square(r.out)) + sum(r.divergence));
    const std::vector<double> g = bound.gradient();
    ASSERT_EQ(g.size(), net.parameters().count());
    Matrix fd(static_cast<Eigen::Index>(g.size()), 1);
    auto values = net.parameters().values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + 1e-5;
      const double up = mlp_loss(net, x);
      values[i] = keep - 1e-5;
      const double down = mlp_loss(net, x);
      values[i] = keep;
      fd(static_cast<Eigen::Index>(i), 0) = (up - down) / 2e-5;
    }
    const Eigen::Map<const Matrix> gm(g.data(), static_cast<Eigen::Index>(g.size()), 1);
    EXPECT_LE(rel_error(gm, fd), 1e-5) << to_string(act);
  }
}

TEST(Mlp, InputGradientMatchesFiniteDifferences) {
  const Mlp net = Mlp::create(small_spec(3, {7}), 12);
  const Matrix x0 = random_matrix(4, 3, 2);
  Tape tape;
  Var x = tape.parameter(x0);
  tape.backward(sum(square(net.bind(tape).forward(0.8, x))));
  auto f = [&](const Matrix& xx) { return net.forward(0.8, xx).squaredNorm(); };
  EXPECT_LE(rel_error(tape.grad(x), finite_difference(f, x0)), 1e-5);
}

TEST(Mlp, LinearDivergenceIsTrace) {
  MlpSpec s = small_spec(2, {});
  s.time_features = false;
  Mlp net = Mlp::create(s, 0);
  net.parameters().set_block(slot_of(net.parameters(), "layer0.weight"),
                             Matrix{{2.0, 0.0}, {0.0, 3.0}});
  EXPECT_DOUBLE_EQ(net.divergence(0.0, random_matrix(1, 2, 4))(0), 5.0);
  net.parameters().set_block(slot_of(net.parameters(), "layer0.weight"), -Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(net.divergence(0.0, random_matrix(1, 2, 4))(0), -2.0);
}

TEST(Mlp, DivergenceMatchesFiniteDifferences) {
  const Mlp net = Mlp::create(small_spec(3, {16, 16}), 77);
  const Matrix x = random_matrix(6, 3, 13);
  const Vector div = net.divergence(0.4, x);
  const double h = 1e-5;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double fd = 0.0;
    for (int k = 0; k < 3; ++k) {
      Matrix xp = x.row(r), xm = x.row(r);
      xp(0, k) += h;
      xm(0, k) -= h;
      fd += (net.forward(0.4, xp)(0, k) - net.forward(0.4, xm)(0, k)) / (2 * h);
    }
    EXPECT_NEAR(div(r), fd, 1e-4);
  }
}

TEST(Mlp, HutchinsonIsUnbiased) {
  const Mlp net = Mlp::create(small_spec(3, {16}), 21);
  const Matrix x = random_matrix(1, 3, 6);
  const double exact = net.divergence(0.1, x)(0);
  DivergenceOptions opts;
  opts.hutchinson = true;
  opts.probes = 4000;
  opts.seed = 3;
  EXPECT_NEAR(net.divergence(0.1, x, opts)(0), exact, 0.05 * std::max(1.0, std::abs(exact)));
}

TEST(Mlp, WrongInputWidthRejected) {
  const Mlp net = Mlp::create(small_spec(2, {4}), 1);
  EXPECT_THROW(net.forward(0.0, Matrix(Matrix::Zero(3, 3))), ShapeError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Mlp net = Mlp::create(small_spec(2, {4}), 1);
  const ParameterSet before = net.parameters();
  AdamState st = AdamState::zeros(before.count());
  adam_step(net.parameters(), std::vector<double>(before.count(), 0.0), st, {});
  EXPECT_TRUE(net.parameters() == before);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  ParameterSet p;
  p.add("w", 1, 3);
  AdamState st = AdamState::zeros(3);
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(p, std::vector<double>{0.5, -2.0, 1e-3}, st, cfg);
  // m_hat = g and v_hat = g^2 at step 1, so each entry moves by lr g / (|g| + eps).
  EXPECT_NEAR(p.values()[0], -0.01, 1e-9);
  EXPECT_NEAR(p.values()[1], 0.01, 1e-9);
  EXPECT_NEAR(p.values()[2], -0.01 * 1e-3 / (1e-3 + 1e-8), 1e-12);
}

TEST(Adam, QuadraticDecreasesMonotonically) {
  ParameterSet p;
  p.add("w", 1, 1);
  p.values()[0] = 1.0;
  AdamState st = AdamState::zeros(1);
  AdamConfig cfg;
  cfg.lr = 0.1;
  double last = 1.0;
  for (int i = 0; i < 2; ++i) {
    adam_step(p, std::vector<double>{2.0 * p.values()[0]}, st, cfg);
    const double loss = p.values()[0] * p.values()[0];
    EXPECT_LT(loss, last);
    last = loss;
  }
}

TEST(Adam, NonFiniteGradientAborts) {
  Mlp net = Mlp::create(small_spec(2, {4}), 1);
  const ParameterSet before = net.parameters();
  AdamState st = AdamState::zeros(before.count());
  std::vector<double> g(before.count(), 0.1);
  g[3] = std::nan("");
  try {
    adam_step(net.parameters(), g, st, {});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer0.weight"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(net.parameters() == before);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Mlp net = Mlp::create(small_spec(3, {5, 7}), 99);
  const auto path = std::filesystem::temp_directory_path() / "sbvae_ckpt_roundtrip.bin";
  net.save(path);
  const Mlp back = Mlp::load(path);
  EXPECT_TRUE(back.parameters() == net.parameters());
  EXPECT_EQ(back.spec().to_json(), net.spec().to_json());
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptInputRejected) {
  EXPECT_THROW(decode_checkpoint("NOTACKPT"), IoError);
  const std::string good = encode_checkpoint(Mlp::create(small_spec(1, {2}), 0).parameters(), "{}");
  EXPECT_THROW(decode_checkpoint(std::string_view(good).substr(0, good.size() - 3)), IoError);
}

TEST(Random, PhiloxKnownAnswer) {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Random, NormalsHaveUnitMoments) {
  const Matrix z = CounterRng(7).normal_matrix(0, 0, 20000, 2);
  EXPECT_NEAR(z.mean(), 0.0, 0.02);
  EXPECT_NEAR(z.array().square().mean(), 1.0, 0.03);
}

}  // namespace
}  // namespace sbvae::ad
