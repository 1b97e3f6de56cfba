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
#include <filesystem>
#include <utility>
#include <vector>

#include "promptseg/image.hpp"

namespace promptseg {

// Lossless PNG reading and writing. All functions throw IoError.

RgbImage read_rgb_png(const std::filesystem::path& path);
RgbImage decode_rgb_png(const std::vector<std::uint8_t>& bytes);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);
std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image);

/// Binary masks are stored as 8-bit gray 0/255; any nonzero reads back as 1.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_png(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);
BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes);

/// Instance label maps as 16-bit single-channel PNG.
void write_label_png(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_label_png(const std::filesystem::path& path);

/// (width, height) from the header only.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

}  // namespace promptseg
