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

#include "promptseg/parameters.hpp"

namespace promptseg {

std::string to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kEncoderBackbone: return "encoder_backbone";
    case ParamGroup::kPromptEncoder: return "prompt_encoder";
    case ParamGroup::kAdapters: return "adapters";
    case ParamGroup::kMaskDecoder: return "mask_decoder";
  }
  return "unknown";
}

ParamGroup group_from_string(std::string_view name) {
  for (ParamGroup g : kAllGroups)
    if (to_string(g) == name) return g;
  throw ConfigError("unknown parameter group '" + std::string(name) + "'");
}

FreezePolicy FreezePolicy::adapter_finetune() {
  return {{ParamGroup::kAdapters, ParamGroup::kMaskDecoder},
          {ParamGroup::kEncoderBackbone, ParamGroup::kPromptEncoder}};
}

FreezePolicy FreezePolicy::all_trainable() {
  return {{std::begin(kAllGroups), std::end(kAllGroups)}, {}};
}

void FreezePolicy::validate() const {
  for (ParamGroup g : kAllGroups) {
    const bool t = trainable_groups.count(g) != 0;
    const bool f = frozen_groups.count(g) != 0;
    if (t && f) throw ConfigError("group '" + to_string(g) + "' is both trainable and frozen");
    if (!t && !f) throw ConfigError("group '" + to_string(g) + "' is neither trainable nor frozen");
  }
}

}  // namespace promptseg
