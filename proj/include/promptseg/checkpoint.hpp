// Copyright 2026 The promptseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "promptseg/model.hpp"

namespace promptseg {

// Checkpoint file layout (little-endian):
//   8 bytes   magic "PSEGCKPT"
//   uint32    format version
//   uint64    manifest length N
//   N bytes   JSON manifest {format_version, dtype, config, checkpoint_id,
//             tensors: [{name, group, buffer, rows, cols, offset, crc32}]}
//   ...       tensor payloads, row-major, offsets relative to payload start

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Manifest plus raw payload; the unit tests edit these directly.
struct CheckpointArchive {
  nlohmann::json manifest;
  std::vector<char> payload;
};

void write_archive(const std::filesystem::path& path, const CheckpointArchive& archive);
/// Throws LoadError on bad magic, version mismatch, or truncation.
CheckpointArchive read_archive(const std::filesystem::path& path);

std::uint32_t crc32_of(const char* data, std::size_t size);

template <typename S>
constexpr const char* dtype_name() {
  return std::is_same_v<S, double> ? "float64" : "float32";
}

template <typename S>
CheckpointArchive make_archive(const ParameterSet<S>& params, const ModelConfig& cfg) {
  CheckpointArchive ar;
  auto tensors = nlohmann::json::array();
  for (const auto& p : params) {
    const std::size_t bytes = sizeof(S) * static_cast<std::size_t>(p.value.size());
    const std::size_t offset = ar.payload.size();
    const char* raw = reinterpret_cast<const char*>(p.value.data());
    ar.payload.insert(ar.payload.end(), raw, raw + bytes);
    tensors.push_back({{"name", p.name},
                       {"group", to_string(p.group)},
                       {"buffer", p.buffer},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"offset", offset},
                       {"crc32", crc32_of(raw, bytes)}});
  }
  char id[16];
  std::snprintf(id, sizeof id, "%08x", crc32_of(ar.payload.data(), ar.payload.size()));
  ar.manifest = {{"format_version", kCheckpointVersion},
                 {"dtype", dtype_name<S>()},
                 {"config", cfg},
                 {"checkpoint_id", std::string("ckpt-") + id},
                 {"tensors", tensors}};
  return ar;
}

template <typename S>
void checkpoint_save(const ParameterSet<S>& params, const ModelConfig& cfg,
                     const std::filesystem::path& path) {
  write_archive(path, make_archive(params, cfg));
}

template <typename S>
struct LoadedCheckpoint {
  ParameterSet<S> params;
  ModelConfig config;
  std::string checkpoint_id;
};

namespace detail {

template <typename From, typename S>
Mat<S> decode_tensor(const char* raw, Eigen::Index rows, Eigen::Index cols) {
  Mat<From> m(rows, cols);
  std::memcpy(m.data(), raw, sizeof(From) * static_cast<std::size_t>(m.size()));
  if constexpr (std::is_same_v<From, S>) return m;
  else return m.template cast<S>();
}

}  // namespace detail

/// Loads and validates against the registry implied by the stored config.
/// Every expected tensor must be present with matching shape and checksum.
template <typename S>
LoadedCheckpoint<S> archive_to_params(const CheckpointArchive& ar) {
  const auto& mf = ar.manifest;
  LoadedCheckpoint<S> out;
  try {
    out.config = mf.at("config").get<ModelConfig>();
    out.config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint manifest has an invalid config: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint manifest has an invalid config: ") + e.what());
  }
  out.checkpoint_id = mf.value("checkpoint_id", std::string("unknown"));
  const std::string dtype = mf.value("dtype", std::string("float32"));
  if (dtype != "float32" && dtype != "float64") throw LoadError("unsupported dtype '" + dtype + "'");
  const std::size_t elem = dtype == "float64" ? 8 : 4;

  std::map<std::string, const nlohmann::json*> entries;
  for (const auto& t : mf.at("tensors")) entries[t.at("name").get<std::string>()] = &t;

  // Shapes come from the registry; values from the file.
  out.params = init_parameters<S>(out.config, 0);
  for (auto& p : out.params) {
    auto it = entries.find(p.name);
    if (it == entries.end()) throw LoadError("missing parameter '" + p.name + "'");
    const nlohmann::json& t = *it->second;
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols())
      throw LoadError("shape mismatch for parameter '" + p.name + "'");
    const auto offset = t.at("offset").get<std::size_t>();
    const std::size_t bytes = elem * static_cast<std::size_t>(rows * cols);
    if (offset + bytes > ar.payload.size())
      throw LoadError("truncated payload for parameter '" + p.name + "'");
    const char* raw = ar.payload.data() + offset;
    if (crc32_of(raw, bytes) != t.at("crc32").get<std::uint32_t>())
      throw LoadError("checksum mismatch for parameter '" + p.name + "'");
    p.value = elem == 8 ? detail::decode_tensor<double, S>(raw, rows, cols)
                        : detail::decode_tensor<float, S>(raw, rows, cols);
    entries.erase(it);
  }
  if (!entries.empty())
    throw LoadError("unexpected parameter '" + entries.begin()->first + "'");
  return out;
}

template <typename S>
LoadedCheckpoint<S> checkpoint_load(const std::filesystem::path& path) {
  try {
    return archive_to_params<S>(read_archive(path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": malformed manifest: " + e.what());
  }
}

/// Identifier derived from the parameter payload.
template <typename S>
std::string checkpoint_id(const ParameterSet<S>& params, const ModelConfig& cfg) {
  return make_archive(params, cfg).manifest.at("checkpoint_id").template get<std::string>();
}

}  // namespace promptseg
