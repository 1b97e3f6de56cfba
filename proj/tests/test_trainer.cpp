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


#include "promptseg/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "promptseg/early_stopping.hpp"
#include "promptseg/synth.hpp"

namespace promptseg {
namespace {

SegmentationOutput<double> constant_output(int side, double logit, int candidates = 3) {
  SegmentationOutput<double> out;
  out.height = out.width = side;
  out.logits = Mat<double>::Constant(candidates, side * side, logit);
  out.prob_maps = out.logits.unaryExpr([](double v) { return sigmoid(v); });
  out.quality_pred.assign(candidates, 0.0);
  return out;
}

BinaryMask random_target(std::mt19937_64& rng, int side, double p) {
  std::bernoulli_distribution b(p);
  BinaryMask m(side, side);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = b(rng);
  return m;
}

TEST(TrainingLoss, HalfProbabilitiesGiveClosedForm) {
  std::mt19937_64 rng(1);
  const auto out = constant_output(16, 0.0);
  for (double p : {0.1, 0.3, 0.5, 0.8}) {
    const BinaryMask t = random_target(rng, 16, p);
    const double n = 256, pos = t.cast<double>().sum(), neg = n - pos;
    // Every pixel costs ln 2; positives are re-weighted by neg/pos and the
    // total by pos/n, i.e. 2 * pos * neg * ln 2 / n^2 per pixel.
    const double bce = training_loss(out, t, {1.0, 0.0});
    EXPECT_NEAR(bce, 2 * pos * neg * std::log(2.0) / (n * n), 1e-9);
    const double soft_iou = training_loss(out, t, {0.0, 1.0});
    EXPECT_NEAR(soft_iou, 1 - (0.5 * pos + 1e-6) / (0.5 * n + 0.5 * pos + 1e-6), 1e-12);
  }
}

TEST(TrainingLoss, SaturatedPredictionApproachesZero) {
  std::mt19937_64 rng(2);
  const BinaryMask t = random_target(rng, 12, 0.4);
  auto out = constant_output(12, 0.0);
  for (int i = 0; i < t.size(); ++i) out.logits(1, i) = t.data()[i] ? 40.0 : -40.0;
  out.quality_pred = {0.0, 1.0, 0.0};
  EXPECT_LT(training_loss(out, t), 1e-9);
  EXPECT_GE(training_loss(out, t), 0.0);
  out.quality_pred = {1.0, 0.0, 0.0};  // selection follows the quality head
  EXPECT_GT(training_loss(out, t), 0.1);
}

TEST(TrainingLoss, PermutationInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 2);
  const BinaryMask t = random_target(rng, 10, 0.3);
  auto out = constant_output(10, 0.0, 1);
  for (int i = 0; i < 100; ++i) out.logits(0, i) = n(rng);
  std::vector<int> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permuted = out;
  BinaryMask tp(10, 10);
  for (int i = 0; i < 100; ++i) {
    permuted.logits(0, i) = out.logits(0, perm[i]);
    tp.data()[i] = t.data()[perm[i]];
  }
  EXPECT_NEAR(training_loss(out, t), training_loss(permuted, tp), 1e-12);
}

TEST(TrainingLoss, RejectsBadTargets) {
  const auto out = constant_output(8, 0.0);
  BinaryMask t = BinaryMask::Zero(8, 8);
  t(2, 2) = 3;
  EXPECT_THROW(training_loss(out, t), InvalidArgument);
  EXPECT_THROW(training_loss(out, BinaryMask::Zero(8, 9)), ShapeError);
}

std::vector<double> stopping_at(int min_epoch, int tail, double tail_value) {
  std::vector<double> h;
  for (int e = 0; e <= min_epoch; ++e) h.push_back(10.0 - e * 0.01);
  for (int e = 0; e < tail; ++e) h.push_back(tail_value);
  return h;
}

TEST(EarlyStoppingRule, Examples) {
  std::vector<double> decreasing(100);
  for (int e = 0; e < 100; ++e) decreasing[e] = 100.0 - e;
  EXPECT_EQ(early_stop_check(decreasing, 40), StopDecision::kContinue);

  auto h = stopping_at(12, 39, 50.0);
  EXPECT_EQ(early_stop_check(h, 40), StopDecision::kContinue);
  h.push_back(50.0);  // epoch 12 + 40
  EXPECT_EQ(early_stop_check(h, 40), StopDecision::kStop);

  // New minimum on the 39th epoch after the previous one resets the count.
  auto reset = stopping_at(12, 38, 50.0);
  reset.push_back(1.0);
  for (int e = 0; e < 39; ++e) reset.push_back(50.0);
  EXPECT_EQ(early_stop_check(reset, 40), StopDecision::kContinue);

  // Equal to the best is not a new minimum.
  auto ties = stopping_at(5, 40, 10.0 - 5 * 0.01);
  EXPECT_EQ(early_stop_check(ties, 40), StopDecision::kStop);

  EXPECT_THROW(early_stop_check({}, 40), InvalidArgument);
  EXPECT_THROW(early_stop_check({1.0}, 0), InvalidArgument);
}

TEST(EarlyStoppingRule, MatchesSimulationOnTenThousandHistories) {
  std::mt19937_64 rng(40);
  int stopped = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int patience = trial % 4 == 0 ? 1 + static_cast<int>(rng() % 60) : 40;
    const int length = 1 + static_cast<int>(rng() % 200);
    // Coarse random walks produce plateaus, ties and late minima.
    std::vector<double> h;
    double v = 10;
    std::uniform_int_distribution<int> step(-3, 3);
    for (int e = 0; e < length; ++e) {
      v = std::max(0.0, v + 0.25 * step(rng));
      h.push_back(v);
    }
    const int want = oracle::early_stop_epoch(h, patience);

    int got = -1;
    EarlyStopping es(patience);
    std::vector<double> prefix;
    for (int e = 0; e < length && got < 0; ++e) {
      prefix.push_back(h[e]);
      const bool improved = es.update(h[e]);
      const auto first_min = std::min_element(prefix.begin(), prefix.end()) - prefix.begin();
      ASSERT_EQ(es.best_epoch(), first_min);
      ASSERT_EQ(improved, first_min == e);
      const bool stop = early_stop_check(prefix, patience) == StopDecision::kStop;
      ASSERT_EQ(stop, es.should_stop());
      if (stop) got = e;
    }
    ASSERT_EQ(got, want) << "trial " << trial << " patience " << patience;
    stopped += got >= 0;
  }
  EXPECT_GT(stopped, 1000);
  EXPECT_LT(stopped, 9000);
}

TEST(TrainConfigJson, RoundTripAndStrictKeys) {
  TrainConfig c = default_train_config(Preset::kTiny);
  EXPECT_EQ(c.max_epochs, 120);
  EXPECT_EQ(c.patience, 40);
  EXPECT_EQ(default_train_config(Preset::kFull).max_epochs, 400);
  c.label_source = LabelSource::kWeak;
  c.regime = RegimeMode::kPct4;
  c.seeds = {3, 4};
  c.prompt_mode = PromptMode::kBoxes;
  const nlohmann::json j = c;
  EXPECT_EQ(j.at("freeze_policy").at("trainable_groups"),
            nlohmann::json::parse(R"(["adapters", "mask_decoder"])"));
  const TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);

  EXPECT_THROW(nlohmann::json::parse(R"({"epochs": 10})").get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"patience": 0})").get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"regime": "pct9"})").get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"seeds": []})").get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"freeze_policy": {"trainable_groups": ["adapters"],
                                        "frozen_groups": ["encoder_backbone"]}})")
                   .get<TrainConfig>(),
               ConfigError);
}

std::vector<TrainSample> synth_samples(int count, std::uint64_t seed, int size = 128) {
  std::vector<TrainSample> out;
  for (auto& s : synth_generate(count, size, seed)) {
    out.push_back({s.image.image_id, s.image.pixels, foreground(s.labels.label_map),
                   s.labels.label_map});
  }
  return out;
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.patience = epochs;
  c.seeds = {5};
  c.learning_rate = 1e-3;
  return c;
}

bool groups_identical(const ParameterSet<float>& a, const ParameterSet<float>& b,
                      std::initializer_list<ParamGroup> groups) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::find(groups.begin(), groups.end(), a[i].group) == groups.end()) continue;
    if (!std::equal(a[i].value.data(), a[i].value.data() + a[i].value.size(), b[i].value.data()))
      return false;
  }
  return true;
}

class FinetuneTest : public ::testing::Test {
 protected:
  ModelConfig cfg = tiny_config();
  ParameterSet<float> init = init_parameters<float>(cfg, 1);
  std::vector<TrainSample> train = synth_samples(2, 10, 96);
  std::vector<TrainSample> val = synth_samples(1, 11, 96);
};

TEST_F(FinetuneTest, SameSeedSameCurves) {
  TrainConfig c = quick_config(3);
  c.seeds = {5, 6};
  const RunResult a = finetune(train, val, c, init, cfg);
  const RunResult b = finetune(train, val, c, init, cfg);
  ASSERT_EQ(a.runs.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    ASSERT_EQ(a.runs[s].curve.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e) {
      EXPECT_EQ(a.runs[s].curve[e].train_loss, b.runs[s].curve[e].train_loss);
      EXPECT_EQ(a.runs[s].curve[e].val_loss, b.runs[s].curve[e].val_loss);
    }
    EXPECT_TRUE(a.runs[s].best_params == b.runs[s].best_params);
  }
  EXPECT_NE(a.runs[0].curve[0].train_loss, a.runs[1].curve[0].train_loss);
  // Cosine schedule from the base rate.
  EXPECT_DOUBLE_EQ(a.runs[0].curve[0].learning_rate, 1e-3);
  EXPECT_LT(a.runs[0].curve[2].learning_rate, a.runs[0].curve[1].learning_rate);
}

TEST_F(FinetuneTest, FrozenGroupsStayBitIdentical) {
  TrainConfig c = quick_config(2);
  c.prompt_mode = PromptMode::kBoxes;
  const RunResult r = finetune(train, val, c, init, cfg);
  const auto& trained = r.runs[0].best_params;
  EXPECT_TRUE(groups_identical(trained, init, {ParamGroup::kEncoderBackbone, ParamGroup::kPromptEncoder}));
  EXPECT_FALSE(groups_identical(trained, init, {ParamGroup::kAdapters}));
  EXPECT_FALSE(groups_identical(trained, init, {ParamGroup::kMaskDecoder}));
}

TEST_F(FinetuneTest, RejectsUnusableInputs) {
  const TrainConfig c = quick_config(1);
  EXPECT_THROW(finetune({}, val, c, init, cfg), ConfigError);
  EXPECT_THROW(finetune(train, {}, c, init, cfg), ConfigError);
  auto empty = train;
  for (auto& s : empty) s.target.setZero();
  EXPECT_THROW(finetune(empty, val, c, init, cfg), ConfigError);
  auto bad = train;
  bad[0].target(0, 0) = 7;
  EXPECT_THROW(finetune(bad, val, c, init, cfg), ConfigError);
  auto no_instances = train;
  for (auto& s : no_instances) s.instances.resize(0, 0);
  TrainConfig boxes = c;
  boxes.prompt_mode = PromptMode::kBoxes;
  EXPECT_THROW(finetune(no_instances, val, boxes, init, cfg), ConfigError);
}

TEST_F(FinetuneTest, NonFiniteLossAborts) {
  ParameterSet<float> poisoned = init;
  poisoned.at("image_encoder.neck.1.weight").value.setConstant(std::numeric_limits<float>::quiet_NaN());
  EXPECT_THROW(finetune(train, val, quick_config(1), poisoned, cfg), TrainingError);
}

TEST_F(FinetuneTest, EpochCallbackAndCheckpoints) {
  const auto dir = std::filesystem::temp_directory_path() / "promptseg_trainer_ckpt";
  std::filesystem::remove_all(dir);
  FinetuneOptions opts;
  opts.checkpoint_dir = dir;
  int calls = 0;
  opts.on_epoch = [&](std::uint64_t seed, const EpochRecord& rec) {
    EXPECT_EQ(seed, 5u);
    EXPECT_EQ(rec.epoch, calls++);
  };
  const RunResult r = finetune(train, val, quick_config(2), init, cfg, opts);
  EXPECT_EQ(calls, 2);
  EXPECT_TRUE(std::filesystem::exists(r.runs[0].checkpoint_path));
  EXPECT_EQ(r.runs[0].best_val_loss, r.runs[0].curve[r.runs[0].best_epoch].val_loss);
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("runs").size(), 1u);
  std::filesystem::remove_all(dir);
}

TEST(RunResultTest, MeanOverSeeds) {
  RunResult r;
  for (double d : {0.7, 0.8, 0.9}) {
    SeedRun s;
    MetricReport rep;
    ImageMetrics m;
    m.dice = d;
    m.iou = d / 2;
    m.auc = d;
    rep.images.push_back(m);
    s.report = rep;
    r.runs.push_back(std::move(s));
  }
  r.runs.push_back(SeedRun{});  // not evaluated
  const MetricSummary mean = r.mean_summary();
  EXPECT_NEAR(mean.dice, 0.8, 1e-12);
  EXPECT_NEAR(mean.iou, 0.4, 1e-12);
  EXPECT_NEAR(*mean.auc, 0.8, 1e-12);
}

TEST(OverfitProbe, TwoSamplesReachHighTrainingDice) {
  const ModelConfig cfg = tiny_config();
  const auto samples = synth_samples(2, 2024);
  TrainConfig c;
  c.max_epochs = 200;
  c.patience = 200;
  c.seeds = {0};
  c.learning_rate = 1e-3;
  c.freeze_policy = FreezePolicy::all_trainable();
  c.augment_flips = false;
  int epochs_run = 0;
  double best_dice = 0;
  FinetuneOptions opts;
  const RunResult r = finetune(samples, samples, c, init_parameters<float>(cfg, 0), cfg, opts);
  epochs_run = static_cast<int>(r.runs[0].curve.size());
  double dice_sum = 0;
  for (const auto& s : samples) {
    const auto out = forward_promptless<float>(s.image, cfg, r.runs[0].best_params);
    const int k = out.best_candidate();
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < s.target.size(); ++i) {
      const bool p = out.prob_maps(k, i) >= 0.5f, t = s.target.data()[i];
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    dice_sum += 2.0 * tp / (2.0 * tp + fp + fn);
  }
  best_dice = dice_sum / 2;
  EXPECT_LE(epochs_run, 200);
  EXPECT_GE(best_dice, 0.95);
}

}  // namespace
}  // namespace promptseg
