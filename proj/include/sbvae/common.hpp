// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace sbvae {

/// Batches are stored one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Error categories surfaced through the C API as status codes.
enum class ErrorKind {
  Shape,
  Contract,
  Divergence,
  Degenerate,
  Mode,
  Config,
  Io,
  Numeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Input arrays have the wrong dimension.
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};

/// A documented precondition was violated.
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorKind::Contract, w) {}
};

/// A simulated trajectory left the finite region; carries the location.
struct DivergenceError : Error {
  DivergenceError(const std::string& w, std::int64_t path, std::int64_t step)
      : Error(ErrorKind::Divergence, w), path_index(path), step_index(step) {}
  std::int64_t path_index;
  std::int64_t step_index;
};

/// A density was requested for a zero-noise transition.
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& w) : Error(ErrorKind::Degenerate, w) {}
};

/// The requested operation does not apply to this model configuration.
struct ModeError : Error {
  explicit ModeError(const std::string& w) : Error(ErrorKind::Mode, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

/// NaN or Inf where a finite number is required.
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};

inline constexpr const char* kVersion = "0.3.0";

/// Non-fatal diagnostics (fallbacks, jitter). Written to stderr unless a
/// handler is installed; pass an empty handler to restore the default.
void warn(const std::string& message);
void set_warning_handler(std::function<void(const std::string&)> handler);

}  // namespace sbvae
