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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "promptseg/image.hpp"

namespace promptseg {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Prediction is [prob >= threshold]. Throws InvalidArgument on shape
/// mismatch, a non-binary ground truth or a threshold outside (0, 1).
ConfusionCounts confusion_counts(const ProbMap& prob, const BinaryMask& gt, double threshold = 0.5);
ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt);

BinaryMask binarize(const ProbMap& prob, double threshold = 0.5);

/// Degenerate denominators: iou/dice are 1 when prediction and ground truth
/// are both empty, recall is 1 for an empty ground truth, precision is 1 for
/// an empty prediction. dice is derived from iou so that
/// dice == 2*iou/(1+iou) holds exactly.
double iou(const ConfusionCounts& c);
double dice(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);

/// Mann-Whitney statistic with average ranks for ties; nullopt when the
/// ground truth holds a single class.
std::optional<double> auc(const ProbMap& prob, const BinaryMask& gt);

/// Maximum F1 over thresholds at every distinct probability value; nullopt
/// when the ground truth holds a single class.
std::optional<double> best_f1(const ProbMap& prob, const BinaryMask& gt);

/// Adjusted Rand Index between two binary pixel partitions; 1 when the
/// expected and maximal index coincide (identical degenerate partitions).
double adjusted_rand(const BinaryMask& pred, const BinaryMask& gt);

struct ImageMetrics {
  std::string image_id;
  double dice = 0, iou = 0, recall = 0, precision = 0, adj = 0;
  std::optional<double> auc, best_f1;
};

ImageMetrics compute_image_metrics(const std::string& image_id, const ProbMap& prob,
                                   const BinaryMask& gt, double threshold = 0.5);

/// Means over the defined per-image values; auc/best_f1 are nullopt when no
/// image defines them.
struct MetricSummary {
  double dice = 0, iou = 0, recall = 0, precision = 0, adj = 0;
  std::optional<double> auc, best_f1;
};

struct ExcludedImage {
  std::string image_id;
  std::string reason;
};

struct MetricReport {
  double threshold = 0.5;
  std::vector<ImageMetrics> images;
  std::vector<ExcludedImage> excluded;

  MetricSummary mean() const;
  int auc_undefined() const;
  int best_f1_undefined() const;
};

/// Metric-wise arithmetic mean (seeds, runs).
MetricSummary mean_of(const std::vector<MetricSummary>& summaries);

void to_json(nlohmann::json& j, const ImageMetrics& m);
void from_json(const nlohmann::json& j, ImageMetrics& m);
void to_json(nlohmann::json& j, const MetricSummary& m);
void from_json(const nlohmann::json& j, MetricSummary& m);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// One row of the method x regime x label-source comparison table.
struct ComparisonRow {
  std::string method;
  std::string regime;
  std::string label_source;
  std::vector<MetricSummary> seeds;
};

/// Markdown table with one line per row; metric columns are the seed means
/// in percent, in the order Dice, AUC, Recall, Precision, bestF1, IoU, ADJ.
std::string format_comparison_table(const std::vector<ComparisonRow>& rows);

}  // namespace promptseg
