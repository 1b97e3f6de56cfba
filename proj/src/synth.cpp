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

#include "promptseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "promptseg/errors.hpp"

namespace promptseg {

bool ellipse_contains(const EllipseSpec& e, double x, double y) {
  const double dx = x - e.cx, dy = y - e.cy;
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double u = (dx * c + dy * s) / e.semi_a;
  const double v = (-dx * s + dy * c) / e.semi_b;
  return u * u + v * v <= 1.0;
}

namespace {

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

SynthSample generate_one(int index, int size, std::uint64_t seed, const std::string& prefix) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SynthSample out;
  char id[64];
  std::snprintf(id, sizeof id, "%s_%04d", prefix.c_str(), index);
  out.image.image_id = id;
  out.labels.image_id = id;
  out.labels.label_map = LabelMap::Zero(size, size);
  LabelMap& labels = out.labels.label_map;

  const double scale = size / 128.0;
  const double min_axis = 5.5 * scale, max_axis = 12.5 * scale;
  const int target = std::uniform_int_distribution<int>(5, 15)(rng);
  std::vector<std::pair<int, int>> pixels;
  for (int attempt = 0; attempt < 20000 && static_cast<int>(out.ellipses.size()) < target;
       ++attempt) {
    EllipseSpec e;
    e.semi_a = uniform(min_axis, max_axis);
    e.semi_b = uniform(min_axis, max_axis);
    e.angle = uniform(0.0, std::numbers::pi);
    const double margin = std::max(e.semi_a, e.semi_b) + 1.0;
    e.cx = uniform(margin, size - margin);
    e.cy = uniform(margin, size - margin);
    pixels.clear();
    bool clear = true;
    const int r0 = std::max(0, static_cast<int>(e.cy - margin));
    const int r1 = std::min(size - 1, static_cast<int>(e.cy + margin));
    const int c0 = std::max(0, static_cast<int>(e.cx - margin));
    const int c1 = std::min(size - 1, static_cast<int>(e.cx + margin));
    for (int r = r0; r <= r1 && clear; ++r)
      for (int c = c0; c <= c1 && clear; ++c) {
        if (!ellipse_contains(e, c + 0.5, r + 0.5)) continue;
        pixels.emplace_back(r, c);
        // keep a one-pixel gap to existing nuclei
        for (int dr = -1; dr <= 1 && clear; ++dr)
          for (int dc = -1; dc <= 1 && clear; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr >= 0 && rr < size && cc >= 0 && cc < size && labels(rr, cc) != 0) clear = false;
          }
      }
    if (!clear || pixels.empty()) continue;
    e.label = static_cast<int>(out.ellipses.size()) + 1;
    for (auto [r, c] : pixels) labels(r, c) = e.label;
    out.ellipses.push_back(e);
  }
  out.labels.instance_count = static_cast<int>(out.ellipses.size());

  // Stained background with smooth illumination drift.
  RgbImage& img = out.image.pixels = RgbImage(size, size);
  const double base[3] = {uniform(215, 235), uniform(160, 185), uniform(190, 215)};
  const double fx = uniform(0.5, 2.0), fy = uniform(0.5, 2.0), phase = uniform(0, 6.28);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double drift =
          8.0 * std::sin(fx * 6.28 * c / size + phase) * std::cos(fy * 6.28 * r / size);
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = clamp_byte(base[ch] + drift + 9.0 * noise(rng));
    }

  // Nuclei: darker purple bodies with granular chromatin and a darker rim.
  for (const auto& e : out.ellipses) {
    const double body[3] = {uniform(70, 120), uniform(40, 80), uniform(110, 160)};
    const double speckle = uniform(0.1, 0.25);
    const double margin = std::max(e.semi_a, e.semi_b) + 1.0;
    for (int r = std::max(0, int(e.cy - margin)); r <= std::min(size - 1, int(e.cy + margin)); ++r)
      for (int c = std::max(0, int(e.cx - margin)); c <= std::min(size - 1, int(e.cx + margin));
           ++c) {
        if (labels(r, c) != e.label) continue;
        const double dx = c + 0.5 - e.cx, dy = r + 0.5 - e.cy;
        const double cs = std::cos(e.angle), sn = std::sin(e.angle);
        const double u = (dx * cs + dy * sn) / e.semi_a, v = (-dx * sn + dy * cs) / e.semi_b;
        const double rim = (u * u + v * v) > 0.7 ? -15.0 : 0.0;
        const double grain = unit(rng) < speckle ? -28.0 : 0.0;
        const double n = 12.0 * noise(rng);
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = clamp_byte(body[ch] + rim + grain + n);
      }
  }
  return out;
}

}  // namespace

std::vector<SynthSample> synth_generate(int count, int image_size, std::uint64_t seed,
                                        const std::string& id_prefix) {
  if (count < 0) throw InvalidArgument("count must be non-negative");
  if (image_size < 32) throw InvalidArgument("image_size must be at least 32");
  std::vector<SynthSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_one(i, image_size, seed, id_prefix));
  return out;
}

}  // namespace promptseg
