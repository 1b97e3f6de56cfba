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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "promptseg/pseudolabel.hpp"
#include "promptseg/splits.hpp"

namespace promptseg {

/// Ids become file names, so they are restricted to [A-Za-z0-9._-] and may
/// not start with a dot.
bool valid_image_id(const std::string& id);

/// On-disk layout shared by the CLI stages and the service:
///   images/<id>.png        RGB inputs
///   labels/<id>.png        16-bit instance label maps
///   splits.txt             "<id> <train|val|test>" per line
///   weak/<id>.json         box annotations
///   pseudolabels/<id>.*    pseudo-label masks + sidecars
///   runs/                  training outputs
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  /// $WORKDIR when set, else ./workdir.
  static std::filesystem::path default_root();

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path image_path(const std::string& id) const;
  std::filesystem::path label_path(const std::string& id) const;
  std::filesystem::path weak_path(const std::string& id) const;
  std::filesystem::path splits_path() const { return root_ / "splits.txt"; }
  std::filesystem::path runs_dir() const { return root_ / "runs"; }

  std::vector<std::string> image_ids() const;
  bool has_image(const std::string& id) const;
  RgbImage load_image(const std::string& id) const;
  void save_image(const std::string& id, const RgbImage& image);
  std::pair<int, int> image_size(const std::string& id) const;

  bool has_labels(const std::string& id) const;
  InstanceMaskSet load_labels(const std::string& id) const;
  void save_labels(const InstanceMaskSet& labels);

  bool has_splits() const;
  SplitAssignment load_splits() const;
  void save_splits(const SplitAssignment& splits);

  bool has_weak(const std::string& id) const;
  WeakAnnotation load_weak(const std::string& id) const;
  void save_weak(const WeakAnnotation& annotation);

  PseudoLabelStore& pseudolabels() { return *pseudo_; }
  const PseudoLabelStore& pseudolabels() const { return *pseudo_; }

 private:
  std::mutex& lock_for(const std::string& id) const;
  void require_id(const std::string& id) const;

  std::filesystem::path root_;
  std::unique_ptr<PseudoLabelStore> pseudo_;
  mutable std::mutex table_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace promptseg
