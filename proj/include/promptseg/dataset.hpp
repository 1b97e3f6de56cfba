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

#include <string>
#include <vector>

#include "promptseg/image.hpp"

namespace promptseg {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split split);
/// Throws ConfigError for unknown tags.
Split split_from_string(const std::string& tag);

struct ImageSample {
  std::string image_id;
  RgbImage pixels;
  Split split = Split::kTrain;
};

/// Per-nucleus label map with contiguous ids 1..instance_count.
struct InstanceMaskSet {
  std::string image_id;
  LabelMap label_map;
  int instance_count = 0;
};

/// Relabels positive ids to 1..K keeping their ascending order; ids with no
/// pixels disappear. Returns K.
int compact_labels(LabelMap& labels);

}  // namespace promptseg
