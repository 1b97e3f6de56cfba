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

#include "promptseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

template <typename A, typename B>
void require_same_shape(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("shape mismatch: " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
}

void require_binary(const BinaryMask& m) {
  if ((m.array() > 1).any()) throw InvalidArgument("ground truth must be binary");
}

double ratio_or_one(std::int64_t num, std::int64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

double choose2(double n) { return n * (n - 1) / 2.0; }

}  // namespace

ConfusionCounts confusion_counts(const ProbMap& prob, const BinaryMask& gt, double threshold) {
  if (!(threshold > 0 && threshold < 1)) throw InvalidArgument("threshold must lie in (0, 1)");
  require_same_shape(prob, gt);
  return confusion_counts(binarize(prob, threshold), gt);
}

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt);
  require_binary(gt);
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    const bool p = pred.data()[i] != 0, t = gt.data()[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

BinaryMask binarize(const ProbMap& prob, double threshold) {
  BinaryMask out(prob.rows(), prob.cols());
  for (Eigen::Index i = 0; i < prob.size(); ++i)
    out.data()[i] = static_cast<double>(prob.data()[i]) >= threshold ? 1 : 0;
  return out;
}

double iou(const ConfusionCounts& c) { return ratio_or_one(c.tp, c.tp + c.fp + c.fn); }

double dice(const ConfusionCounts& c) {
  const double j = iou(c);
  return 2.0 * j / (1.0 + j);
}

double recall(const ConfusionCounts& c) { return ratio_or_one(c.tp, c.tp + c.fn); }
double precision(const ConfusionCounts& c) { return ratio_or_one(c.tp, c.tp + c.fp); }

std::optional<double> auc(const ProbMap& prob, const BinaryMask& gt) {
  require_same_shape(prob, gt);
  require_binary(gt);
  const Eigen::Index n = gt.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return prob.data()[a] < prob.data()[b]; });
  double pos_rank_sum = 0;
  std::int64_t pos = 0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j < n && prob.data()[order[j]] == prob.data()[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (Eigen::Index k = i; k < j; ++k)
      if (gt.data()[order[k]]) {
        pos_rank_sum += avg_rank;
        ++pos;
      }
    i = j;
  }
  const std::int64_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1) / 2.0) / (p * static_cast<double>(neg));
}

std::optional<double> best_f1(const ProbMap& prob, const BinaryMask& gt) {
  require_same_shape(prob, gt);
  require_binary(gt);
  const Eigen::Index n = gt.size();
  const std::int64_t pos = (gt.array() != 0).count();
  if (pos == 0 || pos == n) return std::nullopt;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return prob.data()[a] > prob.data()[b]; });
  // Threshold at each distinct value t: predicted positive = {prob >= t}.
  double best = 0;
  ConfusionCounts c;
  c.fn = pos;
  c.tn = n - pos;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j < n && prob.data()[order[j]] == prob.data()[order[i]]) ++j;
    for (Eigen::Index k = i; k < j; ++k) {
      if (gt.data()[order[k]]) {
        ++c.tp;
        --c.fn;
      } else {
        ++c.fp;
        --c.tn;
      }
    }
    best = std::max(best, dice(c));
    i = j;
  }
  return best;
}

double adjusted_rand(const BinaryMask& pred, const BinaryMask& gt) {
  const ConfusionCounts c = confusion_counts(pred, gt);
  const double n = static_cast<double>(c.total());
  const double index = choose2(c.tp) + choose2(c.fp) + choose2(c.fn) + choose2(c.tn);
  const double rows = choose2(c.tp + c.fp) + choose2(c.fn + c.tn);  // prediction clusters
  const double cols = choose2(c.tp + c.fn) + choose2(c.fp + c.tn);  // ground-truth clusters
  const double pairs = choose2(n);
  const double expected = pairs > 0 ? rows * cols / pairs : 0.0;
  const double max_index = (rows + cols) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ImageMetrics compute_image_metrics(const std::string& image_id, const ProbMap& prob,
                                   const BinaryMask& gt, double threshold) {
  ImageMetrics m;
  m.image_id = image_id;
  const BinaryMask pred = binarize(prob, threshold);
  const ConfusionCounts c = confusion_counts(prob, gt, threshold);
  m.dice = dice(c);
  m.iou = iou(c);
  m.recall = recall(c);
  m.precision = precision(c);
  m.adj = adjusted_rand(pred, gt);
  m.auc = auc(prob, gt);
  m.best_f1 = best_f1(prob, gt);
  return m;
}

namespace {

std::optional<double> mean_defined(const std::vector<std::optional<double>>& xs) {
  double sum = 0;
  int n = 0;
  for (const auto& x : xs)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace

MetricSummary MetricReport::mean() const {
  MetricSummary s;
  if (images.empty()) return s;
  std::vector<std::optional<double>> a, f;
  for (const auto& m : images) {
    s.dice += m.dice;
    s.iou += m.iou;
    s.recall += m.recall;
    s.precision += m.precision;
    s.adj += m.adj;
    a.push_back(m.auc);
    f.push_back(m.best_f1);
  }
  const double n = static_cast<double>(images.size());
  s.dice /= n;
  s.iou /= n;
  s.recall /= n;
  s.precision /= n;
  s.adj /= n;
  s.auc = mean_defined(a);
  s.best_f1 = mean_defined(f);
  return s;
}

int MetricReport::auc_undefined() const {
  return static_cast<int>(std::count_if(images.begin(), images.end(),
                                        [](const ImageMetrics& m) { return !m.auc; }));
}

int MetricReport::best_f1_undefined() const {
  return static_cast<int>(std::count_if(images.begin(), images.end(),
                                        [](const ImageMetrics& m) { return !m.best_f1; }));
}

MetricSummary mean_of(const std::vector<MetricSummary>& summaries) {
  MetricSummary s;
  if (summaries.empty()) return s;
  std::vector<std::optional<double>> a, f;
  for (const auto& m : summaries) {
    s.dice += m.dice;
    s.iou += m.iou;
    s.recall += m.recall;
    s.precision += m.precision;
    s.adj += m.adj;
    a.push_back(m.auc);
    f.push_back(m.best_f1);
  }
  const double n = static_cast<double>(summaries.size());
  s.dice /= n;
  s.iou /= n;
  s.recall /= n;
  s.precision /= n;
  s.adj /= n;
  s.auc = mean_defined(a);
  s.best_f1 = mean_defined(f);
  return s;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const ImageMetrics& m) {
  j = {{"image_id", m.image_id}, {"dice", m.dice},       {"auc", optional_json(m.auc)},
       {"recall", m.recall},     {"precision", m.precision}, {"best_f1", optional_json(m.best_f1)},
       {"iou", m.iou},           {"adj", m.adj}};
}

void from_json(const nlohmann::json& j, ImageMetrics& m) {
  m.image_id = j.at("image_id").get<std::string>();
  m.dice = j.at("dice").get<double>();
  m.iou = j.at("iou").get<double>();
  m.recall = j.at("recall").get<double>();
  m.precision = j.at("precision").get<double>();
  m.adj = j.at("adj").get<double>();
  m.auc = optional_from(j, "auc");
  m.best_f1 = optional_from(j, "best_f1");
}

void to_json(nlohmann::json& j, const MetricSummary& m) {
  j = {{"dice", m.dice},           {"auc", optional_json(m.auc)},
       {"recall", m.recall},       {"precision", m.precision},
       {"best_f1", optional_json(m.best_f1)}, {"iou", m.iou},
       {"adj", m.adj}};
}

void from_json(const nlohmann::json& j, MetricSummary& m) {
  m.dice = j.at("dice").get<double>();
  m.iou = j.at("iou").get<double>();
  m.recall = j.at("recall").get<double>();
  m.precision = j.at("precision").get<double>();
  m.adj = j.at("adj").get<double>();
  m.auc = optional_from(j, "auc");
  m.best_f1 = optional_from(j, "best_f1");
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  auto excluded = nlohmann::json::array();
  for (const auto& e : r.excluded) excluded.push_back({{"image_id", e.image_id}, {"reason", e.reason}});
  j = {{"threshold", r.threshold},
       {"images", r.images},
       {"mean", r.mean()},
       {"auc_undefined", r.auc_undefined()},
       {"best_f1_undefined", r.best_f1_undefined()},
       {"excluded", excluded}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  r.threshold = j.value("threshold", 0.5);
  r.images = j.at("images").get<std::vector<ImageMetrics>>();
  r.excluded.clear();
  for (const auto& e : j.value("excluded", nlohmann::json::array()))
    r.excluded.push_back({e.at("image_id").get<std::string>(), e.at("reason").get<std::string>()});
}

std::string format_comparison_table(const std::vector<ComparisonRow>& rows) {
  std::string out =
      "| Method | Regime | Labels | Dice | AUC | Recall | Precision | bestF1 | IoU | ADJ |\n"
      "|---|---|---|---|---|---|---|---|---|---|\n";
  auto pct = [](std::optional<double> v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    const MetricSummary m = mean_of(r.seeds);
    out += "| " + r.method + " | " + r.regime + " | " + r.label_source + " | " + pct(m.dice) +
           " | " + pct(m.auc) + " | " + pct(m.recall) + " | " + pct(m.precision) + " | " +
           pct(m.best_f1) + " | " + pct(m.iou) + " | " + pct(m.adj) + " |\n";
  }
  return out;
}

}  // namespace promptseg
