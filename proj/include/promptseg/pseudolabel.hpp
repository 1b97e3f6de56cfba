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
#include <string>
#include <vector>

#include "json.hpp"
#include "promptseg/dataset.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

/// One tight box per nucleus, inclusive pixel coordinates.
struct WeakAnnotation {
  std::string image_id;
  std::vector<Box> boxes;
  bool operator==(const WeakAnnotation&) const = default;
};

/// Tight inclusive box per instance id, ascending id order. Ids below the
/// maximum with no pixels are skipped and reported in `warnings`.
WeakAnnotation boxes_from_instances(const InstanceMaskSet& instances,
                                    std::vector<std::string>* warnings = nullptr);

/// Grows each side by `ratio` of the box width/height (outward rounding),
/// clamped to the image.
Box expand_box(const Box& box, double ratio, int image_width, int image_height);

struct PseudoLabelConfig {
  double threshold = 0.5;
  double expand_ratio = 0.1;
};

struct Provenance {
  std::string checkpoint_id;
  double threshold = 0.5;
  double expand_ratio = 0.1;
  std::string selection = "max_quality";
  std::string source = "box_prompt";
  bool operator==(const Provenance&) const = default;
};

struct PseudoLabel {
  std::string image_id;
  BinaryMask mask;
  std::vector<Box> boxes;
  std::vector<double> per_box_confidence;
  Provenance provenance;
};

/// Box-prompted inference per box, best candidate binarized at the
/// threshold, clipped to the expanded box, then OR-merged. Invalid boxes
/// raise InvalidArgument and model failures InferenceError, both naming the
/// box index.
PseudoLabel generate_pseudo_mask(const RgbImage& image, const WeakAnnotation& annotation,
                                 const Segmenter& model, const PseudoLabelConfig& config = {});

/// Same, on an already-open session.
PseudoLabel generate_pseudo_mask(SegmenterSession& session, const WeakAnnotation& annotation,
                                 const std::string& model_id, const PseudoLabelConfig& config = {});

void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);
void to_json(nlohmann::json& j, const WeakAnnotation& a);
void from_json(const nlohmann::json& j, WeakAnnotation& a);
void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);

/// Sidecar record (everything except the mask pixels). Parsing validates the
/// schema and throws ParseError.
nlohmann::json pseudolabel_sidecar(const PseudoLabel& label);
PseudoLabel parse_pseudolabel_sidecar(const nlohmann::json& sidecar);

/// Directory of `<id>.png` (0/255) plus `<id>.json` sidecars. Writes are
/// atomic and serialized per image id.
class PseudoLabelStore {
 public:
  explicit PseudoLabelStore(std::filesystem::path dir);

  void save(const PseudoLabel& label);
  PseudoLabel load(const std::string& image_id) const;
  bool contains(const std::string& image_id) const;
  std::vector<std::string> ids() const;

  std::filesystem::path mask_path(const std::string& image_id) const;
  std::filesystem::path sidecar_path(const std::string& image_id) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::mutex& lock_for(const std::string& image_id) const;

  std::filesystem::path dir_;
  mutable std::mutex table_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

struct BatchError {
  std::string image_id;
  std::string message;
};

struct BatchResult {
  std::vector<PseudoLabel> labels;
  std::vector<BatchError> errors;
};

/// One pseudo-label per image, persisted to `store` when given. Missing
/// annotations and per-image failures are recorded and the batch continues.
/// Output order follows `images`.
BatchResult pseudolabel_batch(const std::vector<ImageSample>& images,
                              const std::map<std::string, WeakAnnotation>& annotations,
                              const Segmenter& model, const PseudoLabelConfig& config,
                              PseudoLabelStore* store = nullptr, int workers = 1);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace promptseg
