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
#include <string>
#include <vector>

#include "promptseg/dataset.hpp"

namespace promptseg {

struct Polygon {
  std::vector<std::array<double, 2>> vertices;  // (x, y) in pixel units
};

/// Even-odd fill sampled at pixel centres (col + 0.5, row + 0.5).
void rasterize_polygon(const Polygon& polygon, std::int32_t label, LabelMap& labels);

/// Polygons of every Region element, in document order. Throws ParseError
/// (with line) for malformed documents.
std::vector<Polygon> parse_region_polygons(const std::string& document);

/// Region/Vertices/Vertex(X, Y) document to an instance map of the given
/// size. Regions with fewer than 3 vertices are skipped with a warning; later
/// regions overwrite earlier ones where they overlap.
InstanceMaskSet parse_annotation_xml(const std::string& document, int width, int height,
                                     const std::string& image_id = {},
                                     std::vector<std::string>* warnings = nullptr);

}  // namespace promptseg
