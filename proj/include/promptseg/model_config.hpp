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

#include "json.hpp"

namespace promptseg {

enum class Preset { kTiny, kFull };

/// Hyperparameters of the promptable segmentation model.
struct ModelConfig {
  int input_resolution = 128;
  int patch_size = 8;
  int encoder_depth = 4;
  int encoder_dim = 64;
  int encoder_heads = 4;
  int neck_dim = 64;
  int adapter_dim = 16;
  double hfc_mask_ratio = 0.25;
  int multimask_count = 3;
  Preset preset = Preset::kTiny;

  // Mask decoder internals.
  int decoder_depth = 2;
  int decoder_heads = 4;
  int decoder_mlp_dim = 512;
  int iou_head_hidden = 64;
  // One up-projection shared by every adapter instead of one per layer.
  bool adapter_shared_up = false;

  int grid() const { return input_resolution / patch_size; }
  int tokens() const { return grid() * grid(); }
  /// Side of the mask decoder's upscaled map (4x the embedding grid).
  int mask_side() const { return grid() * 4; }

  /// Throws ConfigError when an invariant is broken.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

ModelConfig tiny_config();
/// ViT-H-class backbone at 1024 px.
ModelConfig full_config();
ModelConfig config_for(Preset preset);

std::string to_string(Preset preset);
Preset preset_from_string(const std::string& name);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace promptseg
