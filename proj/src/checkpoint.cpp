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

#include "promptseg/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace promptseg {

namespace {
constexpr char kMagic[8] = {'P', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
}

std::uint32_t crc32_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes 32-bit lengths
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_archive(const std::filesystem::path& path, const CheckpointArchive& archive) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string manifest = archive.manifest.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint '" + path.string() + "'");
  const std::uint32_t version = archive.manifest.value("format_version", kCheckpointVersion);
  const std::uint64_t len = manifest.size();
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&version), sizeof version);
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  os.write(archive.payload.data(), static_cast<std::streamsize>(archive.payload.size()));
  if (!os) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

CheckpointArchive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw LoadError(path.string() + ": not a checkpoint file");
  if (version != kCheckpointVersion)
    throw LoadError(path.string() + ": unsupported checkpoint format version " +
                    std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  std::string manifest(len, '\0');
  is.read(manifest.data(), static_cast<std::streamsize>(len));
  if (!is) throw LoadError(path.string() + ": truncated manifest");
  CheckpointArchive ar;
  ar.manifest = nlohmann::json::parse(manifest, nullptr, false);
  if (ar.manifest.is_discarded()) throw LoadError(path.string() + ": corrupt manifest");
  if (ar.manifest.value("format_version", 0u) != kCheckpointVersion)
    throw LoadError(path.string() + ": manifest format version mismatch");
  ar.payload.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  return ar;
}

}  // namespace promptseg
