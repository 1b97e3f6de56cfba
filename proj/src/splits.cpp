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

#include "promptseg/splits.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "promptseg/errors.hpp"

namespace promptseg {

std::vector<std::string> SplitAssignment::ids(Split split) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : split_of)
    if (s == split) out.push_back(id);
  return out;
}

std::size_t SplitAssignment::count(Split split) const { return ids(split).size(); }

std::vector<std::pair<std::string, Split>> parse_split_file(const std::string& text) {
  std::vector<std::pair<std::string, Split>> out;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string id, tag, extra;
    if (!(ls >> id)) continue;
    if (!(ls >> tag) || (ls >> extra))
      throw ParseError("split file: expected '<image_id> <split>'", line_no);
    try {
      out.emplace_back(id, split_from_string(tag));
    } catch (const ConfigError& e) {
      throw ParseError(std::string("split file: ") + e.what(), line_no);
    }
  }
  return out;
}

std::string format_split_file(const SplitAssignment& assignment) {
  std::ostringstream os;
  for (const auto& [id, s] : assignment.split_of) os << id << ' ' << to_string(s) << '\n';
  return os.str();
}

SplitAssignment make_splits(const std::vector<std::string>& pool_ids,
                            const std::vector<std::string>& test_ids, const SplitConfig& config) {
  std::set<std::string> known;
  for (const auto& id : pool_ids)
    if (!known.insert(id).second) throw ConfigError("duplicate image id '" + id + "' in pool");
  for (const auto& id : test_ids)
    if (!known.insert(id).second) throw ConfigError("duplicate image id '" + id + "'");

  SplitAssignment out;
  if (config.split_file) {
    for (const auto& [id, split] : parse_split_file(*config.split_file)) {
      if (!known.count(id)) throw ConfigError("split file references unknown image id '" + id + "'");
      if (!out.split_of.emplace(id, split).second)
        throw ConfigError("split file lists image id '" + id + "' twice");
    }
    for (const auto& id : test_ids)
      if (!out.split_of.count(id)) out.split_of.emplace(id, Split::kTest);
    for (const auto& id : pool_ids)
      if (!out.split_of.count(id))
        throw ConfigError("split file does not assign pool image '" + id + "'");
    return out;
  }

  if (!(config.val_fraction >= 0.0 && config.val_fraction < 1.0))
    throw ConfigError("val_fraction must lie in [0, 1)");
  std::vector<std::string> pool = pool_ids;
  std::sort(pool.begin(), pool.end());
  const auto n_val = static_cast<std::size_t>(std::lround(config.val_fraction * pool.size()));
  const std::size_t n_train = pool.size() - n_val;
  for (std::size_t i = 0; i < pool.size(); ++i)
    out.split_of.emplace(pool[i], i < n_train ? Split::kTrain : Split::kVal);
  for (const auto& id : test_ids) out.split_of.emplace(id, Split::kTest);
  return out;
}

}  // namespace promptseg
