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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "promptseg/metrics.hpp"
#include "promptseg/model.hpp"
#include "promptseg/objective.hpp"
#include "promptseg/regime.hpp"

namespace promptseg {

enum class LabelSource { kComplete, kWeak };
/// Promptless trains the prompt-free path on semantic masks; boxes trains
/// box-prompted decoding on per-instance masks.
enum class PromptMode { kPromptless, kBoxes };

std::string to_string(LabelSource s);
LabelSource label_source_from_string(const std::string& name);
std::string to_string(PromptMode m);
PromptMode prompt_mode_from_string(const std::string& name);

struct TrainConfig {
  LabelSource label_source = LabelSource::kComplete;
  RegimeMode regime = RegimeMode::kFull;
  int max_epochs = 120;
  int patience = 40;
  double learning_rate = 2e-4;
  int batch_size = 1;
  LossWeights loss_weights;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  FreezePolicy freeze_policy = FreezePolicy::adapter_finetune();

  PromptMode prompt_mode = PromptMode::kPromptless;
  int boxes_per_image = 8;
  double quality_weight = 1.0;
  double weight_decay = 0.01;
  bool augment_flips = true;
  // Re-draw the trainable groups from each seed before training.
  bool reinit_trainable = true;

  /// Throws ConfigError.
  void validate() const;
};

/// 120 epochs for the tiny preset, 400 for the full one.
TrainConfig default_train_config(Preset preset);

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const FreezePolicy& p);
void from_json(const nlohmann::json& j, FreezePolicy& p);

/// One supervised image. `target` is the semantic mask (complete or
/// pseudo-label); `instances` is needed only for box-prompted training.
struct TrainSample {
  std::string image_id;
  RgbImage image;
  BinaryMask target;
  LabelMap instances;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double learning_rate = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  int best_epoch = -1;
  double best_val_loss = 0;
  bool stopped_early = false;
  std::vector<EpochRecord> curve;
  ParameterSet<float> best_params;
  std::string checkpoint_id;
  std::string checkpoint_path;
  std::optional<MetricReport> report;
};

struct RunResult {
  ModelConfig model_config;
  TrainConfig config;
  std::vector<SeedRun> runs;

  /// Metric-wise mean of the per-seed report means (seeds with a report).
  MetricSummary mean_summary() const;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void to_json(nlohmann::json& j, const SeedRun& r);
void to_json(nlohmann::json& j, const RunResult& r);

struct FinetuneOptions {
  // When set, each seed's best parameters are written to seed_<n>.ckpt.
  std::filesystem::path checkpoint_dir;
  std::function<void(std::uint64_t seed, const EpochRecord&)> on_epoch;
};

/// Runs every seed of `config`. Deterministic per seed. Throws
/// ConfigError on unusable inputs and TrainingError on a non-finite loss.
RunResult finetune(const std::vector<TrainSample>& train, const std::vector<TrainSample>& val,
                   const TrainConfig& config, const ParameterSet<float>& init_params,
                   const ModelConfig& model_config, const FinetuneOptions& options = {});

/// Mean objective over `samples` without augmentation.
double validation_loss(const std::vector<TrainSample>& samples, const TrainConfig& config,
                       const ParameterSet<float>& params, const ModelConfig& model_config);

}  // namespace promptseg
