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

#include "promptseg/dataset.hpp"

namespace promptseg {

/// A rotated ellipse; a pixel belongs to it when its centre satisfies the
/// implicit equation.
struct EllipseSpec {
  double cx = 0, cy = 0;        // centre, pixel units
  double semi_a = 1, semi_b = 1;  // semi-axes along the rotated x and y axes
  double angle = 0;             // radians
  int label = 0;
};

bool ellipse_contains(const EllipseSpec& e, double x, double y);

struct SynthSample {
  ImageSample image;
  InstanceMaskSet labels;
  std::vector<EllipseSpec> ellipses;
};

/// Tiles of 5-15 non-touching textured "nuclei" on a noisy stained
/// background. Sample i depends only on (seed, i).
std::vector<SynthSample> synth_generate(int count, int image_size, std::uint64_t seed,
                                        const std::string& id_prefix = "synth");

}  // namespace promptseg
