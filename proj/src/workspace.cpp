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

#include "promptseg/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "promptseg/errors.hpp"
#include "promptseg/png_io.hpp"

namespace promptseg {

bool valid_image_id(const std::string& id) {
  if (id.empty() || id.size() > 200 || id[0] == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
  });
}

Workspace::Workspace(std::filesystem::path root) : root_(std::move(root)) {
  for (const char* sub : {"images", "labels", "weak", "runs"})
    std::filesystem::create_directories(root_ / sub);
  pseudo_ = std::make_unique<PseudoLabelStore>(root_ / "pseudolabels");
}

std::filesystem::path Workspace::default_root() {
  if (const char* env = std::getenv("WORKDIR"); env && *env) return env;
  return std::filesystem::current_path() / "workdir";
}

void Workspace::require_id(const std::string& id) const {
  if (!valid_image_id(id)) throw InvalidArgument("invalid image id '" + id + "'");
}

std::filesystem::path Workspace::image_path(const std::string& id) const {
  require_id(id);
  return root_ / "images" / (id + ".png");
}

std::filesystem::path Workspace::label_path(const std::string& id) const {
  require_id(id);
  return root_ / "labels" / (id + ".png");
}

std::filesystem::path Workspace::weak_path(const std::string& id) const {
  require_id(id);
  return root_ / "weak" / (id + ".json");
}

std::mutex& Workspace::lock_for(const std::string& id) const {
  std::lock_guard<std::mutex> g(table_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::vector<std::string> Workspace::image_ids() const {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(root_ / "images"))
    if (e.path().extension() == ".png" && valid_image_id(e.path().stem().string()))
      out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

bool Workspace::has_image(const std::string& id) const {
  return valid_image_id(id) && std::filesystem::exists(image_path(id));
}

RgbImage Workspace::load_image(const std::string& id) const {
  if (!has_image(id)) throw LoadError("unknown image '" + id + "'");
  return read_rgb_png(image_path(id));
}

void Workspace::save_image(const std::string& id, const RgbImage& image) {
  const auto bytes = encode_rgb_png(image);
  std::lock_guard<std::mutex> g(lock_for(id));
  write_file_atomic(image_path(id), std::string(bytes.begin(), bytes.end()));
}

std::pair<int, int> Workspace::image_size(const std::string& id) const {
  if (!has_image(id)) throw LoadError("unknown image '" + id + "'");
  return png_dimensions(image_path(id));
}

bool Workspace::has_labels(const std::string& id) const {
  return valid_image_id(id) && std::filesystem::exists(label_path(id));
}

InstanceMaskSet Workspace::load_labels(const std::string& id) const {
  if (!has_labels(id)) throw LoadError("no label map for image '" + id + "'");
  InstanceMaskSet out;
  out.image_id = id;
  out.label_map = read_label_png(label_path(id));
  out.instance_count = compact_labels(out.label_map);
  return out;
}

void Workspace::save_labels(const InstanceMaskSet& labels) {
  std::lock_guard<std::mutex> g(lock_for(labels.image_id));
  write_label_png(label_path(labels.image_id), labels.label_map);
}

bool Workspace::has_splits() const { return std::filesystem::exists(splits_path()); }

SplitAssignment Workspace::load_splits() const {
  if (!has_splits()) throw LoadError("no split file at " + splits_path().string());
  SplitAssignment out;
  for (const auto& [id, split] : parse_split_file(read_file(splits_path())))
    out.split_of[id] = split;
  return out;
}

void Workspace::save_splits(const SplitAssignment& splits) {
  write_file_atomic(splits_path(), format_split_file(splits));
}

bool Workspace::has_weak(const std::string& id) const {
  return valid_image_id(id) && std::filesystem::exists(weak_path(id));
}

WeakAnnotation Workspace::load_weak(const std::string& id) const {
  const auto path = weak_path(id);
  std::lock_guard<std::mutex> g(lock_for(id));
  if (!std::filesystem::exists(path)) throw LoadError("no weak annotation for image '" + id + "'");
  try {
    return nlohmann::json::parse(read_file(path)).get<WeakAnnotation>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void Workspace::save_weak(const WeakAnnotation& annotation) {
  const auto path = weak_path(annotation.image_id);
  const std::string text = nlohmann::json(annotation).dump(2) + "\n";
  std::lock_guard<std::mutex> g(lock_for(annotation.image_id));
  write_file_atomic(path, text);
}

}  // namespace promptseg
