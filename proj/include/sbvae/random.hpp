// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/common.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace sbvae {

/// Philox4x32-10 block function. Stateless: output is a pure function of
/// (key, counter), so any (stream, step) pair can be drawn independently.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Mixes a seed with a domain tag so unrelated consumers of one user seed get
/// unrelated key material.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Counter-based generator. `stream` usually indexes a path or sample and
/// `step` a time step; every (stream, step) pair yields its own block sequence.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint32_t step, std::uint32_t index) const;

  /// Fills `out` with independent standard normals for (stream, step).
  void normals(std::uint64_t stream, std::uint32_t step, std::span<double> out) const;

  double normal(std::uint64_t stream, std::uint32_t step, std::uint32_t index) const;

  /// Batch of standard normals, row r drawn from stream `first_stream + r`.
  Matrix normal_matrix(std::uint64_t first_stream, std::uint32_t step, Eigen::Index rows,
                       Eigen::Index cols) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t stream, std::uint32_t step,
                                     std::uint32_t block_index) const;

  std::uint64_t seed_;
  std::array<std::uint32_t, 2> key_;
};

/// Sequential convenience wrapper over one stream of a CounterRng.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) : rng_(seed), stream_(stream) {}

  double uniform();
  double normal();
  /// Exponential(1) variate; used for Dirichlet sampling.
  double exponential();
  std::uint64_t below(std::uint64_t n);

 private:
  CounterRng rng_;
  std::uint64_t stream_;
  std::uint32_t step_ = 0;
  std::uint32_t index_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sbvae
