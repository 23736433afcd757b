// Copyright 2026 The sbvae Authors
// SPDX-License-Identifier: Apache-2.0
#include "sbvae/adgrad/parameters.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sbvae::ad {
namespace {

constexpr char kMagic[8] = {'S', 'B', 'V', 'A', 'E', 'P', 'R', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw IoError("checkpoint: truncated header");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::size_t ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  for (const auto& l : layers_) {
    if (l.name == name) throw ContractError("ParameterSet: duplicate layer '" + name + "'");
  }
  LayerSlot slot{name, rows, cols, values_.size()};
  values_.resize(values_.size() + slot.size(), 0.0);
  layers_.push_back(slot);
  return layers_.size() - 1;
}

const LayerSlot& ParameterSet::layer(const std::string& name) const {
  for (const auto& l : layers_) {
    if (l.name == name) return l;
  }
  throw ContractError("ParameterSet: no layer named '" + name + "'");
}

Matrix ParameterSet::block(std::size_t slot) const {
  const LayerSlot& l = layers_.at(slot);
  Matrix m(l.rows, l.cols);
  for (Eigen::Index r = 0; r < l.rows; ++r) {
    for (Eigen::Index c = 0; c < l.cols; ++c) {
      m(r, c) = values_[l.offset + static_cast<std::size_t>(r * l.cols + c)];
    }
  }
  return m;
}

void ParameterSet::set_block(std::size_t slot, const Matrix& m) {
  const LayerSlot& l = layers_.at(slot);
  if (m.rows() != l.rows || m.cols() != l.cols) {
    throw ShapeError("ParameterSet::set_block: shape mismatch for '" + l.name + "'");
  }
  for (Eigen::Index r = 0; r < l.rows; ++r) {
    for (Eigen::Index c = 0; c < l.cols; ++c) {
      values_[l.offset + static_cast<std::size_t>(r * l.cols + c)] = m(r, c);
    }
  }
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (layers_.size() != other.layers_.size() || values_.size() != other.values_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols || a.offset != b.offset) {
      return false;
    }
  }
  return std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

std::string encode_checkpoint(const ParameterSet& params, const std::string& metadata_json) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers()) {
    layers.push_back({{"name", l.name}, {"rows", l.rows}, {"cols", l.cols}, {"offset", l.offset}});
  }
  nlohmann::json blob = {{"layers", layers}, {"meta", nlohmann::json::parse(metadata_json)}};
  const std::string text = blob.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  put<std::uint64_t>(out, params.count());
  const auto values = params.values();
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kFormatVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto blob_len = take<std::uint64_t>(bytes, pos);
  if (pos + blob_len > bytes.size()) throw IoError("checkpoint: truncated layer map");
  nlohmann::json blob;
  try {
    blob = nlohmann::json::parse(bytes.substr(pos, blob_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: malformed layer map: ") + e.what());
  }
  pos += blob_len;
  const auto count = take<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos != count * sizeof(double)) {
    throw IoError("checkpoint: payload size does not match parameter count");
  }

  Checkpoint ck;
  for (const auto& l : blob.at("layers")) {
    const std::size_t slot =
        ck.params.add(l.at("name").get<std::string>(), l.at("rows").get<Eigen::Index>(),
                      l.at("cols").get<Eigen::Index>());
    if (ck.params.layers()[slot].offset != l.at("offset").get<std::size_t>()) {
      throw IoError("checkpoint: non-contiguous layer map");
    }
  }
  if (ck.params.count() != count) throw IoError("checkpoint: layer map does not cover payload");
  std::memcpy(ck.params.values().data(), bytes.data() + pos, count * sizeof(double));
  ck.metadata_json = blob.contains("meta") ? blob["meta"].dump() : "{}";
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                      const std::string& metadata_json) {
  const std::string bytes = encode_checkpoint(params, metadata_json);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace sbvae::ad
