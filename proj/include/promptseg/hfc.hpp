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

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <vector>

#include "promptseg/autograd.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/image.hpp"

namespace promptseg {

/// Half-open row/column span of the centred low-frequency block removed at
/// mask ratio `tau` (in fftshift-ed coordinates).
struct SpectrumBlock {
  int row_begin, row_count, col_begin, col_count;
};

inline SpectrumBlock low_frequency_block(int height, int width, double tau) {
  const double side = std::sqrt(tau);
  const int hs = static_cast<int>(std::lround(side * height));
  const int ws = static_cast<int>(std::lround(side * width));
  return {height / 2 - hs / 2, hs, width / 2 - ws / 2, ws};
}

/// High-frequency component of each row of `planes` (channels x H*W): the
/// inverse DFT after zeroing a centred low-frequency block covering a `tau`
/// fraction of the spectrum. Linear in the input.
template <typename S>
Mat<S> extract_hfc(const Mat<S>& planes, int height, int width, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("hfc mask ratio must lie in [0, 1]");
  if (height <= 0 || width <= 0 || planes.rows() == 0) throw InvalidArgument("empty image");
  if (planes.cols() != Eigen::Index(height) * width) throw ShapeError("extract_hfc: bad plane size");

  const SpectrumBlock block = low_frequency_block(height, width, tau);
  // Membership per unshifted frequency index: fftshift moves k to (k + n/2) mod n.
  auto in_rows = [&](int k) {
    const int s = (k + height / 2) % height;
    return s >= block.row_begin && s < block.row_begin + block.row_count;
  };
  auto in_cols = [&](int k) {
    const int s = (k + width / 2) % width;
    return s >= block.col_begin && s < block.col_begin + block.col_count;
  };

  Eigen::FFT<S> fft;
  using C = std::complex<S>;
  Mat<S> out(planes.rows(), planes.cols());
  std::vector<C> spectrum(std::size_t(height) * width);
  std::vector<C> line_in, line_out;

  auto transform_rows = [&](bool inverse) {
    line_in.resize(width);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) line_in[c] = spectrum[std::size_t(r) * width + c];
      if (inverse) fft.inv(line_out, line_in); else fft.fwd(line_out, line_in);
      for (int c = 0; c < width; ++c) spectrum[std::size_t(r) * width + c] = line_out[c];
    }
  };
  auto transform_cols = [&](bool inverse) {
    line_in.resize(height);
    for (int c = 0; c < width; ++c) {
      for (int r = 0; r < height; ++r) line_in[r] = spectrum[std::size_t(r) * width + c];
      if (inverse) fft.inv(line_out, line_in); else fft.fwd(line_out, line_in);
      for (int r = 0; r < height; ++r) spectrum[std::size_t(r) * width + c] = line_out[r];
    }
  };

  for (Eigen::Index ch = 0; ch < planes.rows(); ++ch) {
    for (Eigen::Index i = 0; i < planes.cols(); ++i) spectrum[i] = C(planes(ch, i), 0);
    transform_rows(false);
    transform_cols(false);
    for (int r = 0; r < height; ++r) {
      if (!in_rows(r)) continue;
      for (int c = 0; c < width; ++c)
        if (in_cols(c)) spectrum[std::size_t(r) * width + c] = C(0, 0);
    }
    transform_cols(true);
    transform_rows(true);
    for (Eigen::Index i = 0; i < planes.cols(); ++i) out(ch, i) = spectrum[i].real();
  }
  return out;
}

/// Convenience overload on raw RGB pixels (values 0..255, float output).
inline Mat<float> extract_hfc(const RgbImage& image, double tau) {
  if (image.empty()) throw InvalidArgument("empty image");
  Mat<float> planes(3, Eigen::Index(image.width) * image.height);
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        planes(ch, Eigen::Index(r) * image.width + c) = image.at(r, c, ch);
  return extract_hfc<float>(planes, image.height, image.width, tau);
}

}  // namespace promptseg
