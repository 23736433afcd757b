// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/data/dataset.hpp"

#include "sbvae/random.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace sbvae::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_mixture_kind(const std::string& k) { return k == "gaussian" || k == "gmm" || k == "ring-gmm"; }

Vector sample_mean(const Matrix& x) { return x.colwise().mean().transpose(); }

Matrix sample_cov(const Matrix& x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / std::max<double>(1.0, static_cast<double>(x.rows() - 1));
}

Matrix generate_nonmixture(const DatasetSpec& spec, Eigen::Index n, std::uint64_t seed) {
  const CounterRng rng(seed);
  Matrix x(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto stream = static_cast<std::uint64_t>(r);
    const double z1 = rng.normal(stream, 1, 0);
    const double z2 = rng.normal(stream, 1, 1);
    if (spec.kind == "two-moons") {
      const double theta = std::numbers::pi * rng.uniform(stream, 0, 1);
      if (rng.uniform(stream, 0, 0) < 0.5) {
        x.row(r) << std::cos(theta), std::sin(theta);
      } else {
        x.row(r) << 1.0 - std::cos(theta), 0.5 - std::sin(theta);
      }
      x.row(r) += spec.sigma * RowVector{{z1, z2}};
    } else if (spec.kind == "ring") {
      const double theta = kTwoPi * rng.uniform(stream, 0, 0);
      x.row(r) << spec.radius * std::cos(theta) + spec.sigma * z1,
          spec.radius * std::sin(theta) + spec.sigma * z2;
    } else {  // checkerboard on [-2, 2]^2, cells with even row + column
      const double u1 = rng.uniform(stream, 0, 0);
      const double u2 = rng.uniform(stream, 0, 1);
      const double u3 = rng.uniform(stream, 0, 2);
      const double x1 = 4.0 * u1 - 2.0;
      const int col = std::min(3, static_cast<int>(std::floor(x1 + 2.0)));
      const int row = 2 * (u2 < 0.5 ? 0 : 1) + (col % 2);
      x.row(r) << x1, row - 2.0 + u3;
    }
  }
  return x;
}

}  // namespace

Standardization Standardization::from_moments(const Vector& mean, const Matrix& cov) {
  const double avg_var = cov.trace() / static_cast<double>(cov.rows());
  if (!(avg_var > 0.0)) throw ContractError("standardization: data has zero variance");
  return {mean, std::sqrt(avg_var)};
}

Matrix Standardization::apply(const Matrix& x) const {
  return (x.rowwise() - mean.transpose()) / scale;
}

Matrix Standardization::invert(const Matrix& x) const {
  return (x * scale).rowwise() + mean.transpose();
}

oracle::GaussianMixture Standardization::apply(const oracle::GaussianMixture& law) const {
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t k = 0; k < law.components(); ++k) {
    means.push_back((law.means()[k] - mean) / scale);
    covs.push_back(law.covs()[k] / (scale * scale));
  }
  return oracle::GaussianMixture(law.weights(), std::move(means), std::move(covs));
}

std::string DatasetSpec::to_json() const {
  nlohmann::json j = {{"kind", kind},   {"dim", dim},         {"mean", mean},
                      {"variance", variance}, {"means", means}, {"weights", weights},
                      {"modes", modes}, {"radius", radius},   {"sigma", sigma},
                      {"standardize", standardize}};
  return j.dump();
}

DatasetSpec DatasetSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DatasetSpec s;
  s.kind = j.value("kind", s.kind);
  s.dim = j.value("dim", s.dim);
  s.mean = j.value("mean", s.mean);
  s.variance = j.value("variance", s.variance);
  s.means = j.value("means", s.means);
  s.weights = j.value("weights", s.weights);
  s.modes = j.value("modes", s.modes);
  s.radius = j.value("radius", s.radius);
  s.sigma = j.value("sigma", s.sigma);
  s.standardize = j.value("standardize", s.standardize);
  return s;
}

void DatasetSpec::validate() const {
  auto fail = [&](const std::string& why) { throw ConfigError("dataset '" + kind + "': " + why); };
  if (dim < 1 || dim > 3) fail("dim must be 1, 2 or 3");
  if (kind == "gaussian") {
    if (!(variance > 0.0)) fail("variance must be > 0");
    if (!mean.empty() && static_cast<int>(mean.size()) != dim) fail("mean has wrong length");
  } else if (kind == "gmm") {
    if (means.empty()) fail("needs at least one mean");
    for (const auto& m : means) {
      if (static_cast<int>(m.size()) != dim) fail("component mean has wrong length");
    }
    if (!weights.empty() && weights.size() != means.size()) fail("weights and means differ in length");
    if (!(sigma > 0.0)) fail("sigma must be > 0");
  } else if (kind == "ring-gmm") {
    if (dim != 2) fail("only defined in 2-D");
    if (modes < 1) fail("modes must be >= 1");
    if (!(radius > 0.0) || !(sigma > 0.0)) fail("radius and sigma must be > 0");
  } else if (kind == "two-moons" || kind == "ring" || kind == "checkerboard") {
    if (dim != 2) fail("only defined in 2-D");
    if (kind == "ring" && !(radius > 0.0)) fail("radius must be > 0");
    if (kind != "checkerboard" && !(sigma >= 0.0)) fail("sigma must be >= 0");
  } else {
    throw ConfigError("unknown dataset kind '" + kind +
                      "' (expected gaussian, gmm, ring-gmm, two-moons, ring or checkerboard)");
  }
}

std::optional<oracle::GaussianMixture> raw_law(const DatasetSpec& spec) {
  spec.validate();
  if (!is_mixture_kind(spec.kind)) return std::nullopt;
  const Matrix iso = Matrix::Identity(spec.dim, spec.dim);
  if (spec.kind == "gaussian") {
    const Vector m = spec.mean.empty() ? Vector::Zero(spec.dim)
                                       : Eigen::Map<const Vector>(spec.mean.data(), spec.dim).eval();
    return oracle::GaussianMixture(oracle::Gaussian{m, spec.variance * iso});
  }
  std::vector<Vector> means;
  if (spec.kind == "gmm") {
    for (const auto& m : spec.means) means.push_back(Eigen::Map<const Vector>(m.data(), spec.dim));
  } else {
    for (int k = 0; k < spec.modes; ++k) {
      const double a = kTwoPi * k / spec.modes;
      means.push_back(Vector{{spec.radius * std::cos(a), spec.radius * std::sin(a)}});
    }
  }
  std::vector<double> w = spec.weights;
  if (w.empty()) w.assign(means.size(), 1.0 / static_cast<double>(means.size()));
  std::vector<Matrix> covs(means.size(), spec.sigma * spec.sigma * iso);
  return oracle::GaussianMixture(std::move(w), std::move(means), std::move(covs));
}

std::optional<oracle::GaussianMixture> standardized_law(const DatasetSpec& spec) {
  auto law = raw_law(spec);
  if (!law || !spec.standardize) return law;
  return Standardization::from_moments(law->mean(), law->covariance()).apply(*law);
}

Dataset generate(const DatasetSpec& spec, Eigen::Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 0) throw ContractError("generate: n must be >= 0");
  Dataset out;
  out.provenance = spec.kind + ":seed=" + std::to_string(seed);
  if (auto law = raw_law(spec)) {
    out.samples = law->sample(n, seed);
    out.transform = spec.standardize ? Standardization::from_moments(law->mean(), law->covariance())
                                     : Standardization::identity(spec.dim);
  } else {
    out.samples = generate_nonmixture(spec, n, seed);
    out.transform = spec.standardize && n >= 2
                        ? Standardization::from_moments(sample_mean(out.samples), sample_cov(out.samples))
                        : Standardization::identity(2);
  }
  out.samples = out.transform.apply(out.samples);
  return out;
}

Matrix read_samples_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const int d = static_cast<int>(header.size());
  for (int k = 0; k < d; ++k) {
    if (header[static_cast<std::size_t>(k)] != "x" + std::to_string(k + 1)) {
      throw IoError(source + ": header must be x1..xd, got '" + line + "'");
    }
  }
  if (d == 0) throw IoError(source + ": header has no columns");
  std::vector<double> values;
  Eigen::Index rows = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const char* b = cell.data();
      const char* e = b + cell.size();
      while (b < e && *b == ' ') ++b;
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
        throw IoError(source + ":" + std::to_string(lineno) + ": not a finite number: '" + cell + "'");
      }
      values.push_back(v);
      ++cols;
    }
    if (cols != d) {
      throw IoError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(d) +
                    " columns, got " + std::to_string(cols));
    }
    ++rows;
  }
  Matrix x(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int k = 0; k < d; ++k) x(r, k) = values[static_cast<std::size_t>(r * d + k)];
  }
  return x;
}

Matrix read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_samples_csv(in, path.string());
}

void write_samples_csv(std::ostream& out, const Matrix& x) {
  for (Eigen::Index k = 0; k < x.cols(); ++k) out << (k ? "," : "") << "x" << k + 1;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) out << (k ? "," : "") << x(r, k);
    out << '\n';
  }
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& x, int dim) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  if (x.rows() == 0) {
    for (int k = 0; k < dim; ++k) out << (k ? "," : "") << "x" << k + 1;
    out << '\n';
    return;
  }
  write_samples_csv(out, x);
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path, bool standardize) {
  Dataset out;
  out.samples = read_samples_csv(path);
  out.provenance = "file:" + path.string();
  if (out.size() < 2) throw IoError(path.string() + ": need at least 2 samples");
  if (out.dim() > 3) throw IoError(path.string() + ": dimension above 3 is not supported");
  out.transform = standardize ? Standardization::from_moments(sample_mean(out.samples),
                                                              sample_cov(out.samples))
                              : Standardization::identity(out.dim());
  out.samples = out.transform.apply(out.samples);
  return out;
}

}  // namespace sbvae::data
