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

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace promptseg {

template <typename T>
using Plane = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BinaryMask = Plane<std::uint8_t>;  // values in {0, 1}
using LabelMap = Plane<std::int32_t>;    // 0 = background, k = instance id
using ProbMap = Plane<float>;

/// Interleaved 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(std::size_t(w) * h * 3, 0) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t& at(int row, int col, int ch) {
    return data[(std::size_t(row) * width + col) * 3 + ch];
  }
  std::uint8_t at(int row, int col, int ch) const {
    return data[(std::size_t(row) * width + col) * 3 + ch];
  }
  bool operator==(const RgbImage&) const = default;
};

/// Axis-aligned box in inclusive pixel coordinates: columns x0..x1, rows y0..y1.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool valid_in(int image_width, int image_height) const {
    return x0 <= x1 && y0 <= y1 && x0 >= 0 && y0 >= 0 && x1 < image_width && y1 < image_height;
  }
  bool operator==(const Box&) const = default;
};

/// Semantic foreground (label > 0) of an instance map.
inline BinaryMask foreground(const LabelMap& labels) {
  return (labels.array() > 0).cast<std::uint8_t>();
}

}  // namespace promptseg
