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

#include <optional>
#include <string>
#include <vector>

#include "promptseg/errors.hpp"
#include "promptseg/image.hpp"

namespace promptseg {

struct PointPrompt {
  double x = 0, y = 0;  // pixel coordinates
  bool foreground = true;
  bool operator==(const PointPrompt&) const = default;
};

/// Prompts in original-image pixel coordinates. An empty set means
/// prompt-free inference.
struct PromptSet {
  std::vector<Box> boxes;
  std::vector<PointPrompt> points;
  // Low-resolution logit prior, square, at 4x the embedding grid.
  std::optional<Plane<float>> dense_prior;

  bool empty() const { return boxes.empty() && points.empty() && !dense_prior; }

  /// Throws InvalidArgument naming the first offending prompt.
  void validate(int image_width, int image_height) const {
    for (std::size_t i = 0; i < boxes.size(); ++i)
      if (!boxes[i].valid_in(image_width, image_height))
        throw InvalidArgument("box " + std::to_string(i) + " lies outside the image or is inverted");
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (!(p.x >= 0 && p.y >= 0 && p.x < image_width && p.y < image_height))
        throw InvalidArgument("point " + std::to_string(i) + " lies outside the image");
    }
  }

  static PromptSet single_box(const Box& b) {
    PromptSet p;
    p.boxes.push_back(b);
    return p;
  }
};

}  // namespace promptseg
