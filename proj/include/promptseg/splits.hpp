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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "promptseg/dataset.hpp"

namespace promptseg {

struct SplitConfig {
  // Validation share of the training pool when no split file is given;
  // 30 pool images give the 24/6 partition.
  double val_fraction = 0.2;
  // Contents of a split file ("<image_id> <train|val|test>" per line).
  std::optional<std::string> split_file;
};

struct SplitAssignment {
  std::map<std::string, Split> split_of;

  std::vector<std::string> ids(Split split) const;
  std::size_t count(Split split) const;
};

/// Default: the pool sorted lexicographically, first (1 - val_fraction)
/// to train, the rest to val; test ids go to test. With a split file the
/// assignment is taken verbatim and must cover every known id exactly once.
SplitAssignment make_splits(const std::vector<std::string>& pool_ids,
                            const std::vector<std::string>& test_ids, const SplitConfig& config);

/// Parses split-file text. Throws ParseError / ConfigError.
std::vector<std::pair<std::string, Split>> parse_split_file(const std::string& text);
std::string format_split_file(const SplitAssignment& assignment);

}  // namespace promptseg
