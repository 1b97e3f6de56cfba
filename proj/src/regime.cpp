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

#include "promptseg/regime.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "promptseg/errors.hpp"

namespace promptseg {

std::string to_string(RegimeMode mode) {
  switch (mode) {
    case RegimeMode::kFull: return "full";
    case RegimeMode::kPct4: return "pct4";
    case RegimeMode::kPct0_5: return "pct0_5";
  }
  return "unknown";
}

RegimeMode regime_from_string(const std::string& name) {
  if (name == "full") return RegimeMode::kFull;
  if (name == "pct4") return RegimeMode::kPct4;
  if (name == "pct0_5") return RegimeMode::kPct0_5;
  throw ConfigError("unknown regime '" + name + "'");
}

CropRegime make_crop_regime(RegimeMode mode, const std::vector<ImageExtent>& train_images,
                            std::uint64_t seed, int crop_size) {
  CropRegime regime;
  regime.mode = mode;
  regime.seed = seed;
  regime.crop_size = crop_size;
  if (mode == RegimeMode::kFull) return regime;
  if (crop_size <= 0) throw ConfigError("crop_size must be positive");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen(train_images.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  if (mode == RegimeMode::kPct0_5) {
    if (train_images.size() < 3) throw ConfigError("pct0_5 needs at least 3 training images");
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(3);
  }
  for (std::size_t i : chosen) {
    const auto& img = train_images[i];
    if (img.width < crop_size || img.height < crop_size)
      throw ConfigError("image '" + img.image_id + "' is smaller than the crop size");
    std::uniform_int_distribution<int> row(0, img.height - crop_size);
    std::uniform_int_distribution<int> col(0, img.width - crop_size);
    const int r0 = row(rng);
    const int c0 = col(rng);
    regime.crops.push_back({img.image_id, r0, c0});
  }
  return regime;
}

std::vector<AnnotatedSample> apply_crop_regime(const std::vector<AnnotatedSample>& samples,
                                               const CropRegime& regime) {
  if (regime.mode == RegimeMode::kFull) return samples;
  std::map<std::string, const AnnotatedSample*> by_id;
  for (const auto& s : samples) by_id[s.image.image_id] = &s;

  std::vector<AnnotatedSample> out;
  const int k = regime.crop_size;
  for (const auto& crop : regime.crops) {
    auto it = by_id.find(crop.image_id);
    if (it == by_id.end()) throw ConfigError("crop references unknown image '" + crop.image_id + "'");
    AnnotatedSample s = *it->second;
    RgbImage& px = s.image.pixels;
    LabelMap& labels = s.labels.label_map;
    if (crop.row0 < 0 || crop.col0 < 0 || crop.row0 + k > px.height || crop.col0 + k > px.width)
      throw Error("internal: crop window outside image '" + crop.image_id + "'");
    for (int y = 0; y < px.height; ++y)
      for (int x = 0; x < px.width; ++x) {
        const bool inside =
            y >= crop.row0 && y < crop.row0 + k && x >= crop.col0 && x < crop.col0 + k;
        if (inside) continue;
        for (int c = 0; c < 3; ++c) px.at(y, x, c) = 0;
        labels(y, x) = 0;
      }
    s.labels.instance_count = compact_labels(labels);
    out.push_back(std::move(s));
  }
  return out;
}

double annotated_fraction(const CropRegime& regime, const std::vector<ImageExtent>& train_images) {
  std::int64_t total = 0;
  for (const auto& img : train_images) total += std::int64_t(img.width) * img.height;
  if (total == 0) return 0.0;
  if (regime.mode == RegimeMode::kFull) return 1.0;
  const std::int64_t annotated =
      std::int64_t(regime.crops.size()) * regime.crop_size * regime.crop_size;
  return static_cast<double>(annotated) / static_cast<double>(total);
}

void to_json(nlohmann::json& j, const CropRegime& r) {
  auto crops = nlohmann::json::array();
  for (const auto& c : r.crops)
    crops.push_back({{"image_id", c.image_id}, {"row0", c.row0}, {"col0", c.col0}});
  j = {{"mode", to_string(r.mode)}, {"crop_size", r.crop_size}, {"seed", r.seed}, {"crops", crops}};
}

void from_json(const nlohmann::json& j, CropRegime& r) {
  r.mode = regime_from_string(j.at("mode").get<std::string>());
  r.crop_size = j.value("crop_size", 200);
  r.seed = j.value("seed", std::uint64_t{0});
  r.crops.clear();
  for (const auto& c : j.value("crops", nlohmann::json::array()))
    r.crops.push_back({c.at("image_id").get<std::string>(), c.at("row0").get<int>(),
                       c.at("col0").get<int>()});
}

}  // namespace promptseg
