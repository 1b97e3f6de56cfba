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

#include <array>

#include "promptseg/autograd.hpp"
#include "promptseg/hfc.hpp"
#include "promptseg/image.hpp"
#include "promptseg/model_config.hpp"

namespace promptseg {

// Per-channel normalization constants (ImageNet statistics on the 0..255 scale).
inline constexpr std::array<double, 3> kPixelMean = {123.675, 116.28, 103.53};
inline constexpr std::array<double, 3> kPixelStd = {58.395, 57.12, 57.375};

/// Model-ready tensors for one image.
template <typename S>
struct PreparedImage {
  Mat<S> planes;       // 3 x R*R, normalized
  Mat<S> patches;      // tokens x 3*p*p
  Mat<S> hfc_patches;  // tokens x 3*p*p
  int source_width = 0;
  int source_height = 0;
};

/// Bilinear resize of a single (h x w) plane to (out_h x out_w).
template <typename S, typename Derived>
Mat<S> resize_bilinear(const Eigen::MatrixBase<Derived>& plane, int out_h, int out_w) {
  const Mat<double> ry = bilinear_weights<double>(static_cast<int>(plane.rows()), out_h);
  const Mat<double> rx = bilinear_weights<double>(static_cast<int>(plane.cols()), out_w);
  return (ry * plane.template cast<double>() * rx.transpose()).template cast<S>();
}

/// Builds model inputs from planar normalized pixels (3 x R*R).
template <typename S>
PreparedImage<S> prepare_planes(Mat<S> planes, const ModelConfig& cfg) {
  const int r = cfg.input_resolution;
  if (planes.rows() != 3 || planes.cols() != Eigen::Index(r) * r)
    throw ShapeError("input planes must be 3 x " + std::to_string(r) + "^2 after preprocessing");
  PreparedImage<S> out;
  Mat<S> hfc = extract_hfc<S>(planes, r, r, cfg.hfc_mask_ratio);
  out.patches = patchify<S>(planes, r, r, cfg.patch_size);
  out.hfc_patches = patchify<S>(hfc, r, r, cfg.patch_size);
  out.planes = std::move(planes);
  out.source_width = r;
  out.source_height = r;
  return out;
}

/// Resize to the model resolution, then normalize per channel.
template <typename S>
PreparedImage<S> prepare_image(const RgbImage& image, const ModelConfig& cfg) {
  if (image.empty()) throw InvalidArgument("empty image");
  const int r = cfg.input_resolution;
  Mat<S> planes(3, Eigen::Index(r) * r);
  Plane<double> channel(image.height, image.width);
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) channel(y, x) = image.at(y, x, ch);
    Mat<double> resized = (image.width == r && image.height == r)
                              ? Mat<double>(channel)
                              : resize_bilinear<double>(channel, r, r);
    for (Eigen::Index i = 0; i < resized.size(); ++i)
      planes(ch, i) = static_cast<S>((resized.data()[i] - kPixelMean[ch]) / kPixelStd[ch]);
  }
  PreparedImage<S> out = prepare_planes<S>(std::move(planes), cfg);
  out.source_width = image.width;
  out.source_height = image.height;
  return out;
}

/// Nearest-neighbour resize of a mask or label map (pixel-centre sampling).
template <typename T>
Plane<T> resize_nearest(const Plane<T>& mask, int out_h, int out_w) {
  if (mask.rows() == out_h && mask.cols() == out_w) return mask;
  Plane<T> out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = std::min<int>(static_cast<int>((y + 0.5) * mask.rows() / out_h), mask.rows() - 1);
    for (int x = 0; x < out_w; ++x) {
      const int sx = std::min<int>(static_cast<int>((x + 0.5) * mask.cols() / out_w), mask.cols() - 1);
      out(y, x) = mask(sy, sx);
    }
  }
  return out;
}

}  // namespace promptseg
