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

#include <chrono>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "promptseg/errors.hpp"

namespace promptseg {
namespace {

struct Case {
  ProbMap prob;
  BinaryMask gt;
};

// Sizes 1..8 per side; a third of the maps are quantized to force ties.
Case random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> side(1, 8);
  const int h = side(rng), w = side(rng);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::bernoulli_distribution fg(std::uniform_real_distribution<double>(0.05, 0.95)(rng));
  const bool quantize = rng() % 3 == 0;
  Case c{ProbMap(h, w), BinaryMask(h, w)};
  for (Eigen::Index i = 0; i < c.prob.size(); ++i) {
    float p = u(rng);
    if (quantize) p = std::round(p * 4.0f) / 4.0f;
    c.prob.data()[i] = p;
    c.gt.data()[i] = fg(rng) ? 1 : 0;
  }
  return c;
}

bool single_class(const BinaryMask& m) {
  const auto s = m.cast<int>().sum();
  return s == 0 || s == m.size();
}

TEST(MetricOracles, ThousandRandomMasksMatchBruteForce) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260101);
  int auc_checked = 0;
  for (int n = 0; n < 1000; ++n) {
    const Case c = random_case(rng);
    const auto ref = oracle::count_pixels(c.prob, c.gt, 0.5);
    const ImageMetrics m = compute_image_metrics("case", c.prob, c.gt, 0.5);
    ASSERT_NEAR(m.dice, oracle::dice(ref), 1e-9) << n;
    ASSERT_NEAR(m.iou, oracle::iou(ref), 1e-9) << n;
    ASSERT_NEAR(m.recall, oracle::recall(ref), 1e-9) << n;
    ASSERT_NEAR(m.precision, oracle::precision(ref), 1e-9) << n;
    ASSERT_NEAR(m.adj, oracle::ari_pairs(binarize(c.prob, 0.5), c.gt), 1e-9) << n;
    if (single_class(c.gt)) {
      ASSERT_FALSE(m.auc.has_value()) << n;
      ASSERT_FALSE(m.best_f1.has_value()) << n;
    } else {
      ASSERT_TRUE(m.auc && m.best_f1) << n;
      ASSERT_NEAR(*m.auc, oracle::auc_all_pairs(c.prob, c.gt), 1e-9) << n;
      ASSERT_NEAR(*m.best_f1, oracle::best_f1_sweep(c.prob, c.gt), 1e-9) << n;
      ++auc_checked;
    }
  }
  EXPECT_GT(auc_checked, 800);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 30.0);
}

TEST(MetricOracles, AdjustedRandOnArbitraryPartitions) {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 1000; ++n) {
    const Case a = random_case(rng);
    BinaryMask b(a.gt.rows(), a.gt.cols());
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng() % 2;
    ASSERT_NEAR(adjusted_rand(a.gt, b), oracle::ari_pairs(a.gt, b), 1e-9) << n;
  }
}

TEST(MetricIdentities, DiceIouIdentityAndBestF1Bound) {
  std::mt19937_64 rng(77);
  for (int n = 0; n < 10000; ++n) {
    const Case c = random_case(rng);
    const ConfusionCounts cc = confusion_counts(c.prob, c.gt, 0.5);
    const double j = iou(cc);
    ASSERT_EQ(dice(cc), 2 * j / (1 + j)) << n;
    if (const auto bf = best_f1(c.prob, c.gt)) {
      ASSERT_GE(*bf, dice(cc)) << n;
    }
  }
}

TEST(MetricExamples, HandComputedOverlap) {
  // |P| = 6, |G| = 4, |P n G| = 3 on a 4x4 grid.
  BinaryMask pred = BinaryMask::Zero(4, 4), gt = BinaryMask::Zero(4, 4);
  pred.row(0).setOnes();
  pred(1, 0) = pred(1, 1) = 1;
  gt(0, 0) = gt(0, 1) = gt(0, 2) = 1;
  gt(3, 3) = 1;
  const ConfusionCounts c = confusion_counts(pred, gt);
  EXPECT_EQ(c, (ConfusionCounts{3, 3, 1, 9}));
  EXPECT_DOUBLE_EQ(dice(c), 0.6);
  EXPECT_DOUBLE_EQ(iou(c), 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(precision(c), 0.5);
  EXPECT_DOUBLE_EQ(recall(c), 0.75);
}

TEST(MetricExamples, DegenerateMasks) {
  const BinaryMask empty = BinaryMask::Zero(5, 5);
  const ConfusionCounts both_empty = confusion_counts(empty, empty);
  EXPECT_EQ(dice(both_empty), 1.0);
  EXPECT_EQ(iou(both_empty), 1.0);
  EXPECT_EQ(recall(both_empty), 1.0);
  EXPECT_EQ(precision(both_empty), 1.0);
  EXPECT_EQ(adjusted_rand(empty, empty), 1.0);
  EXPECT_FALSE(auc(ProbMap::Constant(5, 5, 0.3f), empty).has_value());

  BinaryMask full = BinaryMask::Ones(5, 5);
  EXPECT_EQ(dice(confusion_counts(empty, full)), 0.0);
  EXPECT_EQ(adjusted_rand(full, full), 1.0);
}

TEST(MetricExamples, ConstantMapBestF1) {
  std::mt19937_64 rng(4);
  for (int n = 0; n < 50; ++n) {
    Case c = random_case(rng);
    if (single_class(c.gt)) continue;
    c.prob.setConstant(0.37f);
    const double p = c.gt.cast<double>().mean();
    ASSERT_NEAR(*best_f1(c.prob, c.gt), 2 * p / (p + 1), 1e-12);
    ASSERT_EQ(*auc(c.prob, c.gt), 0.5);
  }
}

TEST(MetricProperties, AucInvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(9);
  for (int n = 0; n < 200; ++n) {
    Case c = random_case(rng);
    if (single_class(c.gt)) continue;
    const auto before = auc(c.prob, c.gt);
    ProbMap squashed = c.prob.unaryExpr([](float v) { return v * v * v * 0.5f + 0.1f; });
    ASSERT_DOUBLE_EQ(*auc(squashed, c.gt), *before);
  }
}

TEST(MetricProperties, AdjustedRandSymmetryAndLabelSwap) {
  std::mt19937_64 rng(10);
  for (int n = 0; n < 500; ++n) {
    const Case a = random_case(rng);
    const BinaryMask b = binarize(a.prob, 0.5);
    const BinaryMask swapped = (1 - b.array()).matrix();
    ASSERT_NEAR(adjusted_rand(a.gt, b), adjusted_rand(b, a.gt), 1e-12);
    ASSERT_NEAR(adjusted_rand(a.gt, b), adjusted_rand(a.gt, swapped), 1e-12);
    ASSERT_LE(adjusted_rand(a.gt, b), 1.0 + 1e-12);
  }
}

TEST(MetricErrors, InvalidInputs) {
  const ProbMap p = ProbMap::Constant(3, 3, 0.5f);
  EXPECT_THROW(confusion_counts(p, BinaryMask::Zero(3, 4), 0.5), InvalidArgument);
  BinaryMask bad = BinaryMask::Zero(3, 3);
  bad(1, 1) = 2;
  EXPECT_THROW(confusion_counts(p, bad, 0.5), InvalidArgument);
  EXPECT_THROW(confusion_counts(p, BinaryMask::Zero(3, 3), 0.0), InvalidArgument);
  EXPECT_THROW(confusion_counts(p, BinaryMask::Zero(3, 3), 1.0), InvalidArgument);
}

TEST(MetricReportTest, MeanSkipsUndefinedValues) {
  MetricReport r;
  ImageMetrics a, b;
  a.image_id = "a";
  a.dice = 0.8;
  a.iou = 0.6;
  a.auc = 0.9;
  b.image_id = "b";
  b.dice = 0.4;
  b.iou = 0.2;
  r.images = {a, b};
  r.excluded.push_back({"c", "missing ground truth"});
  const MetricSummary m = r.mean();
  EXPECT_DOUBLE_EQ(m.dice, 0.6);
  EXPECT_DOUBLE_EQ(m.iou, 0.4);
  EXPECT_DOUBLE_EQ(*m.auc, 0.9);
  EXPECT_FALSE(m.best_f1.has_value());
  EXPECT_EQ(r.auc_undefined(), 1);
  EXPECT_EQ(r.best_f1_undefined(), 2);

  const nlohmann::json j = r;
  EXPECT_EQ(j.at("excluded").size(), 1u);
  EXPECT_EQ(j.at("auc_undefined"), 1);
  const MetricReport back = j.get<MetricReport>();
  EXPECT_EQ(back.images.size(), 2u);
  EXPECT_DOUBLE_EQ(back.mean().dice, 0.6);
  EXPECT_FALSE(back.images[1].auc.has_value());
}

TEST(MetricReportTest, SeedMeanAndTable) {
  MetricSummary s1, s2;
  s1.dice = 0.8;
  s1.iou = 0.7;
  s1.auc = 0.9;
  s2.dice = 0.7;
  s2.iou = 0.5;
  s2.auc = 0.8;
  const MetricSummary m = mean_of({s1, s2});
  EXPECT_DOUBLE_EQ(m.dice, 0.75);
  EXPECT_DOUBLE_EQ(m.iou, 0.6);
  EXPECT_DOUBLE_EQ(*m.auc, 0.85);
  const std::string table = format_comparison_table({{"adapter", "pct4", "weak", {s1, s2}}});
  EXPECT_NE(table.find("| Method | Regime | Labels | Dice | AUC | Recall | Precision | bestF1 | "
                       "IoU | ADJ |"),
            std::string::npos);
  EXPECT_NE(table.find("| adapter | pct4 | weak | 75.00 | 85.00 | 0.00 | 0.00 | n/a | 60.00 |"),
            std::string::npos);
}

}  // namespace
}  // namespace promptseg
