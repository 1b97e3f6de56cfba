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
#include <optional>
#include <string>
#include <vector>

#include "promptseg/metrics.hpp"
#include "promptseg/segmenter.hpp"
#include "promptseg/trainer.hpp"

namespace promptseg {

struct EvalSample {
  std::string image_id;
  RgbImage image;
  std::optional<BinaryMask> ground_truth;
};

/// Prompt-free inference per image, probabilities at the source
/// resolution, per-image metrics. Images without (or with mismatched)
/// ground truth are excluded and listed in the report.
MetricReport evaluate_split(const Segmenter& model, const std::vector<EvalSample>& samples,
                            double threshold = 0.5, int workers = 1);

MetricReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                 const std::vector<EvalSample>& samples, double threshold = 0.5,
                                 int workers = 1);

/// Fills every seed's report from its best parameters.
void evaluate_runs(RunResult& result, const std::vector<EvalSample>& samples,
                   double threshold = 0.5, int workers = 1);

}  // namespace promptseg
