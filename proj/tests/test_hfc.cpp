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


#include "promptseg/hfc.hpp"

#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

namespace promptseg {
namespace {

RgbImage random_image(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> px(0, 255);
  RgbImage img(width, height);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(px(rng));
  return img;
}

// Direct O(N^2) DFT with the low block chosen on the shifted spectrum.
Mat<double> hfc_by_direct_dft(const Mat<double>& plane, int h, int w, double tau) {
  using C = std::complex<double>;
  const double pi = std::numbers::pi;
  std::vector<C> spec(std::size_t(h) * w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      C s = 0;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          s += plane(0, r * w + c) * std::polar(1.0, -2 * pi * (double(u) * r / h + double(v) * c / w));
      spec[u * w + v] = s;
    }
  const int hs = static_cast<int>(std::lround(std::sqrt(tau) * h));
  const int ws = static_cast<int>(std::lround(std::sqrt(tau) * w));
  const int r0 = h / 2 - hs / 2, c0 = w / 2 - ws / 2;
  for (int sr = r0; sr < r0 + hs; ++sr)
    for (int sc = c0; sc < c0 + ws; ++sc) {
      const int u = (sr - h / 2 + h) % h, v = (sc - w / 2 + w) % w;
      spec[u * w + v] = 0;
    }
  Mat<double> out(1, h * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      C s = 0;
      for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v)
          s += spec[u * w + v] * std::polar(1.0, 2 * pi * (double(u) * r / h + double(v) * c / w));
      out(0, r * w + c) = s.real() / (h * w);
    }
  return out;
}

TEST(Hfc, ZeroRatioIsIdentity) {
  const RgbImage img = random_image(1, 37, 24);
  const Mat<float> out = extract_hfc(img, 0.0);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        ASSERT_NEAR(out(ch, r * img.width + c), img.at(r, c, ch), 1e-5 * 255);
}

TEST(Hfc, ZeroRatioIsIdentityOnNormalizedPlanes) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Mat<double> planes(3, 16 * 20);
  for (Eigen::Index i = 0; i < planes.size(); ++i) planes.data()[i] = n(rng);
  EXPECT_LE((extract_hfc<double>(planes, 16, 20, 0.0) - planes).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Hfc, FullRatioRemovesEverything) {
  const RgbImage img = random_image(3, 32, 32);
  EXPECT_LE(extract_hfc(img, 1.0).cwiseAbs().maxCoeff(), 1e-3f);
  const RgbImage odd = random_image(4, 33, 17);
  EXPECT_LE(extract_hfc(odd, 1.0).cwiseAbs().maxCoeff(), 1e-3f);
}

TEST(Hfc, ConstantImageHasNoHighFrequencies) {
  RgbImage img(48, 40);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      img.at(r, c, 0) = 200;
      img.at(r, c, 1) = 120;
      img.at(r, c, 2) = 33;
    }
  EXPECT_LE(extract_hfc(img, 0.25).cwiseAbs().maxCoeff(), 1e-3f);
}

TEST(Hfc, MatchesDirectDft) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto [h, w] : {std::pair{8, 8}, std::pair{6, 10}, std::pair{7, 9}}) {
    Mat<double> plane(1, h * w);
    for (Eigen::Index i = 0; i < plane.size(); ++i) plane.data()[i] = u(rng);
    for (double tau : {0.1, 0.25, 0.5}) {
      const Mat<double> fast = extract_hfc<double>(plane, h, w, tau);
      const Mat<double> slow = hfc_by_direct_dft(plane, h, w, tau);
      EXPECT_LE((fast - slow).cwiseAbs().maxCoeff(), 1e-9) << h << "x" << w << " tau " << tau;
    }
  }
}

TEST(Hfc, IsLinear) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  Mat<double> a(2, 12 * 12), b(2, 12 * 12);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = n(rng);
    b.data()[i] = n(rng);
  }
  const Mat<double> lhs = extract_hfc<double>(2.0 * a + b, 12, 12, 0.25);
  const Mat<double> rhs =
      2.0 * extract_hfc<double>(a, 12, 12, 0.25) + extract_hfc<double>(b, 12, 12, 0.25);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Hfc, BlockGeometry) {
  const SpectrumBlock b = low_frequency_block(64, 64, 0.25);
  EXPECT_EQ(b.row_count, 32);
  EXPECT_EQ(b.col_count, 32);
  EXPECT_EQ(b.row_begin, 16);
  EXPECT_EQ(b.col_begin, 16);
}

TEST(Hfc, RejectsBadInput) {
  const RgbImage img = random_image(7, 8, 8);
  EXPECT_THROW(extract_hfc(img, -0.1), InvalidArgument);
  EXPECT_THROW(extract_hfc(img, 1.1), InvalidArgument);
  EXPECT_THROW(extract_hfc(RgbImage{}, 0.25), InvalidArgument);
  EXPECT_THROW(extract_hfc<double>(Mat<double>::Zero(1, 10), 3, 3, 0.25), ShapeError);
}

}  // namespace
}  // namespace promptseg
