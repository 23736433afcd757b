// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/oracle/gaussian.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sbvae::data {

/// Affine map x -> (x - mean) / scale, kept so generated samples can be
/// mapped back to data units.
struct Standardization {
  Vector mean;
  double scale = 1.0;

  static Standardization identity(int dim) { return {Vector::Zero(dim), 1.0}; }
  /// Zero mean and average unit variance: scale^2 = tr(cov) / d.
  static Standardization from_moments(const Vector& mean, const Matrix& cov);
  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& x) const;
  oracle::GaussianMixture apply(const oracle::GaussianMixture& law) const;
};

struct Dataset {
  Matrix samples;          // n x d
  std::string provenance;  // generator name and seed, or file path
  Standardization transform;

  int dim() const { return static_cast<int>(samples.cols()); }
  Eigen::Index size() const { return samples.rows(); }
};

struct DatasetSpec {
  /// gaussian | gmm | ring-gmm | two-moons | ring | checkerboard
  std::string kind = "ring-gmm";
  int dim = 2;
  // gaussian
  std::vector<double> mean;  // empty means zero
  double variance = 1.0;
  // gmm: isotropic components with standard deviation `sigma`
  std::vector<std::vector<double>> means;
  std::vector<double> weights;  // empty means equal
  // ring-gmm, ring
  int modes = 8;
  double radius = 2.0;
  double sigma = 0.2;
  bool standardize = true;

  std::string to_json() const;
  static DatasetSpec from_json(const std::string& text);
  /// Throws ConfigError on invalid parameters.
  void validate() const;
};

/// Exact law in raw units for the Gaussian-mixture kinds; nullopt otherwise.
std::optional<oracle::GaussianMixture> raw_law(const DatasetSpec& spec);

/// Exact law after the standardization `generate` applies.
std::optional<oracle::GaussianMixture> standardized_law(const DatasetSpec& spec);

/// Deterministic given seed. Mixture kinds are standardized with their exact
/// population moments; the others with sample moments.
Dataset generate(const DatasetSpec& spec, Eigen::Index n, std::uint64_t seed);

/// CSV with header x1..xd. Validates numeric cells and a constant column count.
Matrix read_samples_csv(const std::filesystem::path& path);
Matrix read_samples_csv(std::istream& in, const std::string& source);
void write_samples_csv(std::ostream& out, const Matrix& x);
void write_samples_csv(const std::filesystem::path& path, const Matrix& x, int dim);

/// Loads a file dataset, optionally standardizing with sample moments.
Dataset load_dataset(const std::filesystem::path& path, bool standardize);

}  // namespace sbvae::data
