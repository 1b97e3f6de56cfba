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
#include <string>
#include <vector>

#include "json.hpp"
#include "promptseg/dataset.hpp"

namespace promptseg {

/// Annotation budget: everything, one crop per training image, or three
/// crops from three distinct training images.
enum class RegimeMode { kFull, kPct4, kPct0_5 };

std::string to_string(RegimeMode mode);
RegimeMode regime_from_string(const std::string& name);

struct CropWindow {
  std::string image_id;
  int row0 = 0, col0 = 0;
  bool operator==(const CropWindow&) const = default;
};

struct CropRegime {
  RegimeMode mode = RegimeMode::kFull;
  int crop_size = 200;
  std::uint64_t seed = 0;
  std::vector<CropWindow> crops;
  bool operator==(const CropRegime&) const = default;
};

struct ImageExtent {
  std::string image_id;
  int width = 0, height = 0;
};

/// Draws crop positions uniformly over valid positions. Throws ConfigError
/// when crops cannot fit or too few images are available.
CropRegime make_crop_regime(RegimeMode mode, const std::vector<ImageExtent>& train_images,
                            std::uint64_t seed, int crop_size = 200);

struct AnnotatedSample {
  ImageSample image;
  InstanceMaskSet labels;
};

/// Keeps labels only inside each crop and zeroes every pixel outside it.
/// Images without a crop are dropped (pct regimes); full mode is the identity.
std::vector<AnnotatedSample> apply_crop_regime(const std::vector<AnnotatedSample>& samples,
                                               const CropRegime& regime);

/// Annotated pixels over total pixels of `train_images`.
double annotated_fraction(const CropRegime& regime, const std::vector<ImageExtent>& train_images);

void to_json(nlohmann::json& j, const CropRegime& r);
void from_json(const nlohmann::json& j, CropRegime& r);

}  // namespace promptseg
