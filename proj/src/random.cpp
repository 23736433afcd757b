// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/random.hpp"

#include <cmath>
#include <numbers>

namespace sbvae {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// 53 random bits mapped to (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ (tag * 0xA24BAED4963EE407ull));
}

CounterRng::CounterRng(std::uint64_t seed) : seed_(seed) {
  const std::uint64_t k = splitmix64(seed);
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t stream, std::uint32_t step,
                                               std::uint32_t block_index) const {
  return philox4x32({static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                     step, block_index},
                    key_);
}

double CounterRng::uniform(std::uint64_t stream, std::uint32_t step, std::uint32_t index) const {
  const auto b = block(stream, step, index / 2);
  return (index % 2 == 0) ? to_open_unit(b[0], b[1]) : to_open_unit(b[2], b[3]);
}

void CounterRng::normals(std::uint64_t stream, std::uint32_t step, std::span<double> out) const {
  // Box-Muller: one Philox block gives two uniforms, hence two normals.
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const auto b = block(stream, step, static_cast<std::uint32_t>(i / 2));
    const double u1 = to_open_unit(b[0], b[1]);
    const double u2 = to_open_unit(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] = r * std::cos(angle);
    if (i + 1 < out.size()) out[i + 1] = r * std::sin(angle);
  }
}

double CounterRng::normal(std::uint64_t stream, std::uint32_t step, std::uint32_t index) const {
  const auto b = block(stream, step, index / 2);
  const double u1 = to_open_unit(b[0], b[1]);
  const double u2 = to_open_unit(b[2], b[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
}

Matrix CounterRng::normal_matrix(std::uint64_t first_stream, std::uint32_t step, Eigen::Index rows,
                                 Eigen::Index cols) const {
  Matrix out(rows, cols);
  std::vector<double> buf(static_cast<std::size_t>(cols));
  for (Eigen::Index r = 0; r < rows; ++r) {
    normals(first_stream + static_cast<std::uint64_t>(r), step, buf);
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = buf[static_cast<std::size_t>(c)];
  }
  return out;
}

double RngStream::uniform() {
  const double u = rng_.uniform(stream_, step_, index_);
  if (++index_ == 0) ++step_;
  return u;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  have_spare_ = true;
  return r * std::cos(angle);
}

double RngStream::exponential() { return -std::log(uniform()); }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw ContractError("RngStream::below: empty range");
  const auto v = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return v < n ? v : n - 1;
}

}  // namespace sbvae
