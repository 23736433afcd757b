// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sbvae/common.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sbvae::ad {

/// One named block inside a flat parameter array, stored row-major.
struct LayerSlot {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Flat array of real parameters plus the layer index map that gives it shape.
class ParameterSet {
 public:
  ParameterSet() = default;

  /// Appends a zero-filled block and returns its slot index.
  std::size_t add(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  std::size_t count() const { return values_.size(); }
  const std::vector<LayerSlot>& layers() const { return layers_; }
  const LayerSlot& layer(const std::string& name) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Copies a block out as a matrix.
  Matrix block(std::size_t slot) const;
  void set_block(std::size_t slot, const Matrix& m);

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<LayerSlot> layers_;
  std::vector<double> values_;
};

/// Parameter checkpoint: little-endian header (magic, version, JSON layer map,
/// count) followed by raw IEEE-754 doubles. `metadata_json` is embedded in the
/// JSON blob under "meta" and returned by read_checkpoint.
void write_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                      const std::string& metadata_json = "{}");

struct Checkpoint {
  ParameterSet params;
  std::string metadata_json;
};

Checkpoint read_checkpoint(const std::filesystem::path& path);

/// In-memory encodings of the same format, used by the C API and tests.
std::string encode_checkpoint(const ParameterSet& params, const std::string& metadata_json);
Checkpoint decode_checkpoint(std::string_view bytes);

}  // namespace sbvae::ad
