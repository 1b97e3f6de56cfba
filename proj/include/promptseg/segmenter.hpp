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
#include <memory>
#include <string>

#include "promptseg/model.hpp"

namespace promptseg {

/// Best candidate of one prompted decode, at the source image resolution.
struct MaskPrediction {
  ProbMap prob;
  float quality = 0;
  int candidate = 0;
};

/// An image encoded once; each predict call decodes one prompt set.
class SegmenterSession {
 public:
  virtual ~SegmenterSession() = default;
  virtual int width() const = 0;
  virtual int height() const = 0;
  /// Throws InvalidArgument for prompts outside the image.
  virtual MaskPrediction predict(const PromptSet& prompts) = 0;
};

/// Read-only inference interface; implementations must be safe to use from
/// several threads at once.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::unique_ptr<SegmenterSession> open(const RgbImage& image) const = 0;
  virtual std::string model_id() const = 0;
};

/// The promptable model in single precision.
class SamSegmenter final : public Segmenter {
 public:
  SamSegmenter(ModelConfig cfg, ParameterSet<float> params, std::string model_id);
  static std::shared_ptr<SamSegmenter> from_checkpoint(const std::filesystem::path& path);

  std::unique_ptr<SegmenterSession> open(const RgbImage& image) const override;
  std::string model_id() const override { return id_; }
  const ModelConfig& config() const { return cfg_; }
  const ParameterSet<float>& parameters() const { return params_; }

 private:
  ModelConfig cfg_;
  ParameterSet<float> params_;
  std::string id_;
};

/// Bilinear resize of a square model-resolution map to the source size.
ProbMap resize_to_source(const Eigen::Map<const Mat<float>>& map, int width, int height);

}  // namespace promptseg
