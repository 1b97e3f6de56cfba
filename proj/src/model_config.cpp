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

#include "promptseg/model_config.hpp"

#include "promptseg/errors.hpp"

namespace promptseg {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be a positive integer");
  };
  positive(input_resolution, "input_resolution");
  positive(patch_size, "patch_size");
  positive(encoder_depth, "encoder_depth");
  positive(encoder_dim, "encoder_dim");
  positive(encoder_heads, "encoder_heads");
  positive(neck_dim, "neck_dim");
  positive(adapter_dim, "adapter_dim");
  positive(decoder_depth, "decoder_depth");
  positive(decoder_heads, "decoder_heads");
  positive(decoder_mlp_dim, "decoder_mlp_dim");
  positive(iou_head_hidden, "iou_head_hidden");
  if (input_resolution % patch_size != 0)
    throw ConfigError("input_resolution must be a multiple of patch_size");
  if (!(hfc_mask_ratio >= 0.0 && hfc_mask_ratio <= 1.0))
    throw ConfigError("hfc_mask_ratio must lie in [0, 1]");
  if (multimask_count != 1 && multimask_count != 3)
    throw ConfigError("multimask_count must be 1 or 3");
  if (encoder_dim % encoder_heads != 0) throw ConfigError("encoder_dim must divide by heads");
  if (neck_dim % 16 != 0) throw ConfigError("neck_dim must be a multiple of 16");
  if ((neck_dim / 2) % decoder_heads != 0)
    throw ConfigError("neck_dim / 2 must divide by decoder_heads");
}

ModelConfig tiny_config() { return ModelConfig{}; }

ModelConfig full_config() {
  ModelConfig c;
  c.preset = Preset::kFull;
  c.input_resolution = 1024;
  c.patch_size = 16;
  c.encoder_depth = 32;
  c.encoder_dim = 1280;
  c.encoder_heads = 16;
  c.neck_dim = 256;
  c.adapter_dim = 40;
  c.multimask_count = 3;
  c.decoder_depth = 2;
  c.decoder_heads = 8;
  c.decoder_mlp_dim = 2048;
  c.iou_head_hidden = 256;
  return c;
}

ModelConfig config_for(Preset preset) {
  return preset == Preset::kFull ? full_config() : tiny_config();
}

std::string to_string(Preset preset) { return preset == Preset::kFull ? "full" : "tiny"; }

Preset preset_from_string(const std::string& name) {
  if (name == "tiny") return Preset::kTiny;
  if (name == "full") return Preset::kFull;
  throw ConfigError("unknown preset '" + name + "'");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"preset", to_string(c.preset)},
                     {"input_resolution", c.input_resolution},
                     {"patch_size", c.patch_size},
                     {"encoder_depth", c.encoder_depth},
                     {"encoder_dim", c.encoder_dim},
                     {"encoder_heads", c.encoder_heads},
                     {"neck_dim", c.neck_dim},
                     {"adapter_dim", c.adapter_dim},
                     {"hfc_mask_ratio", c.hfc_mask_ratio},
                     {"multimask_count", c.multimask_count},
                     {"decoder_depth", c.decoder_depth},
                     {"decoder_heads", c.decoder_heads},
                     {"decoder_mlp_dim", c.decoder_mlp_dim},
                     {"iou_head_hidden", c.iou_head_hidden},
                     {"adapter_shared_up", c.adapter_shared_up}};
}

// Keys absent from the document fall back to the preset's values.
void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = config_for(preset_from_string(j.value("preset", std::string("tiny"))));
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  take("input_resolution", c.input_resolution);
  take("patch_size", c.patch_size);
  take("encoder_depth", c.encoder_depth);
  take("encoder_dim", c.encoder_dim);
  take("encoder_heads", c.encoder_heads);
  take("neck_dim", c.neck_dim);
  take("adapter_dim", c.adapter_dim);
  take("hfc_mask_ratio", c.hfc_mask_ratio);
  take("multimask_count", c.multimask_count);
  take("decoder_depth", c.decoder_depth);
  take("decoder_heads", c.decoder_heads);
  take("decoder_mlp_dim", c.decoder_mlp_dim);
  take("iou_head_hidden", c.iou_head_hidden);
  take("adapter_shared_up", c.adapter_shared_up);
}

}  // namespace promptseg
