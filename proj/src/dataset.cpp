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

#include "promptseg/dataset.hpp"

#include <map>

#include "promptseg/errors.hpp"

namespace promptseg {

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& tag) {
  if (tag == "train") return Split::kTrain;
  if (tag == "val") return Split::kVal;
  if (tag == "test") return Split::kTest;
  throw ConfigError("unknown split tag '" + tag + "'");
}

int compact_labels(LabelMap& labels) {
  std::map<std::int32_t, std::int32_t> remap;
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels.data()[i] > 0) remap[labels.data()[i]] = 0;
  std::int32_t next = 0;
  for (auto& [from, to] : remap) to = ++next;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    auto& v = labels.data()[i];
    if (v > 0) v = remap[v];
  }
  return next;
}

}  // namespace promptseg
