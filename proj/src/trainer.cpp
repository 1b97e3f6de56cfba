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

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "promptseg/checkpoint.hpp"
#include "promptseg/early_stopping.hpp"
#include "promptseg/optimizer.hpp"
#include "promptseg/pseudolabel.hpp"

namespace promptseg {

std::string to_string(LabelSource s) { return s == LabelSource::kWeak ? "weak" : "complete"; }

LabelSource label_source_from_string(const std::string& name) {
  if (name == "complete") return LabelSource::kComplete;
  if (name == "weak") return LabelSource::kWeak;
  throw ConfigError("unknown label source '" + name + "'");
}

std::string to_string(PromptMode m) { return m == PromptMode::kBoxes ? "boxes" : "promptless"; }

PromptMode prompt_mode_from_string(const std::string& name) {
  if (name == "promptless") return PromptMode::kPromptless;
  if (name == "boxes") return PromptMode::kBoxes;
  throw ConfigError("unknown prompt mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (max_epochs < patience) throw ConfigError("max_epochs must be at least patience");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (loss_weights.bce_weight < 0 || loss_weights.iou_weight < 0 || quality_weight < 0)
    throw ConfigError("loss weights must be non-negative");
  if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (boxes_per_image < 1) throw ConfigError("boxes_per_image must be at least 1");
  freeze_policy.validate();
  if (freeze_policy.trainable_groups.empty()) throw ConfigError("no trainable parameter group");
}

TrainConfig default_train_config(Preset preset) {
  TrainConfig c;
  c.max_epochs = preset == Preset::kFull ? 400 : 120;
  return c;
}

void to_json(nlohmann::json& j, const FreezePolicy& p) {
  std::vector<std::string> t, f;
  for (auto g : p.trainable_groups) t.push_back(to_string(g));
  for (auto g : p.frozen_groups) f.push_back(to_string(g));
  j = {{"trainable_groups", t}, {"frozen_groups", f}};
}

void from_json(const nlohmann::json& j, FreezePolicy& p) {
  p.trainable_groups.clear();
  p.frozen_groups.clear();
  for (const auto& s : j.at("trainable_groups")) p.trainable_groups.insert(group_from_string(s.get<std::string>()));
  for (const auto& s : j.at("frozen_groups")) p.frozen_groups.insert(group_from_string(s.get<std::string>()));
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"label_source", to_string(c.label_source)},
       {"regime", to_string(c.regime)},
       {"max_epochs", c.max_epochs},
       {"patience", c.patience},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"loss_weights", {{"bce_weight", c.loss_weights.bce_weight},
                         {"iou_weight", c.loss_weights.iou_weight}}},
       {"seeds", c.seeds},
       {"freeze_policy", c.freeze_policy},
       {"prompt_mode", to_string(c.prompt_mode)},
       {"boxes_per_image", c.boxes_per_image},
       {"quality_weight", c.quality_weight},
       {"weight_decay", c.weight_decay},
       {"augment_flips", c.augment_flips},
       {"reinit_trainable", c.reinit_trainable}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "label_source", "regime",       "max_epochs",      "patience",       "learning_rate",
      "batch_size",   "loss_weights", "seeds",           "freeze_policy",  "prompt_mode",
      "boxes_per_image", "quality_weight", "weight_decay", "augment_flips", "reinit_trainable"};
  if (!j.is_object()) throw ConfigError("train config must be an object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown train config key '" + key + "'");
  try {
    if (j.contains("label_source")) c.label_source = label_source_from_string(j["label_source"]);
    if (j.contains("regime")) c.regime = regime_from_string(j["regime"]);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("loss_weights")) {
      c.loss_weights.bce_weight = j["loss_weights"].value("bce_weight", c.loss_weights.bce_weight);
      c.loss_weights.iou_weight = j["loss_weights"].value("iou_weight", c.loss_weights.iou_weight);
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("freeze_policy")) c.freeze_policy = j["freeze_policy"].get<FreezePolicy>();
    if (j.contains("prompt_mode")) c.prompt_mode = prompt_mode_from_string(j["prompt_mode"]);
    c.boxes_per_image = j.value("boxes_per_image", c.boxes_per_image);
    c.quality_weight = j.value("quality_weight", c.quality_weight);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.augment_flips = j.value("augment_flips", c.augment_flips);
    c.reinit_trainable = j.value("reinit_trainable", c.reinit_trainable);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  c.validate();
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"train_loss", r.train_loss},
       {"val_loss", r.val_loss},
       {"learning_rate", r.learning_rate}};
}

void to_json(nlohmann::json& j, const SeedRun& r) {
  j = {{"seed", r.seed},
       {"best_epoch", r.best_epoch},
       {"best_val_loss", r.best_val_loss},
       {"stopped_early", r.stopped_early},
       {"checkpoint_id", r.checkpoint_id},
       {"checkpoint_path", r.checkpoint_path},
       {"curve", r.curve},
       {"report", r.report ? nlohmann::json(*r.report) : nlohmann::json(nullptr)}};
}

void to_json(nlohmann::json& j, const RunResult& r) {
  j = {{"model_config", r.model_config}, {"train_config", r.config}, {"runs", r.runs}};
  bool any = false;
  for (const auto& s : r.runs) any = any || s.report.has_value();
  if (any) j["mean"] = r.mean_summary();
}

MetricSummary RunResult::mean_summary() const {
  std::vector<MetricSummary> seeds;
  for (const auto& r : runs)
    if (r.report) seeds.push_back(r.report->mean());
  return mean_of(seeds);
}

namespace {

template <typename T>
Plane<T> flip(const Plane<T>& p, bool horizontal, bool vertical) {
  if (horizontal && vertical) return p.reverse();
  if (horizontal) return p.rowwise().reverse();
  if (vertical) return p.colwise().reverse();
  return p;
}

RgbImage flip(const RgbImage& img, bool horizontal, bool vertical) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int sy = vertical ? img.height - 1 - y : y;
      const int sx = horizontal ? img.width - 1 - x : x;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  return out;
}

/// A sample ready for the model: inputs, prompt sets and matching targets.
struct Episode {
  PreparedImage<float> image;
  std::vector<PromptSet> prompts;
  std::vector<Mat<float>> targets;  // 1 x R*R each
};

Mat<float> target_row(const BinaryMask& mask, int r) {
  const BinaryMask m = resize_nearest(mask, r, r);
  return Eigen::Map<const Plane<std::uint8_t>>(m.data(), 1, m.size()).cast<float>();
}

Episode make_episode(const TrainSample& s, const TrainConfig& cfg, const ModelConfig& mc,
                     bool hflip, bool vflip, std::mt19937_64* rng) {
  Episode ep;
  const int r = mc.input_resolution;
  const RgbImage image = flip(s.image, hflip, vflip);
  ep.image = prepare_image<float>(image, mc);
  if (cfg.prompt_mode == PromptMode::kPromptless) {
    ep.prompts.emplace_back();
    ep.targets.push_back(target_row(flip(s.target, hflip, vflip), r));
    return ep;
  }
  InstanceMaskSet inst{s.image_id, flip(s.instances, hflip, vflip), 0};
  inst.instance_count = inst.label_map.size() ? inst.label_map.maxCoeff() : 0;
  const WeakAnnotation boxes = boxes_from_instances(inst);
  // boxes_from_instances lists boxes for present ids in ascending order
  std::vector<int> present;
  for (int id = 1; id <= inst.instance_count; ++id)
    if ((inst.label_map.array() == id).any()) present.push_back(id);
  std::vector<int> ids = present;
  if (rng) std::shuffle(ids.begin(), ids.end(), *rng);
  if (static_cast<int>(ids.size()) > cfg.boxes_per_image) ids.resize(cfg.boxes_per_image);
  for (int id : ids) {
    const auto pos = std::lower_bound(present.begin(), present.end(), id) - present.begin();
    ep.prompts.push_back(PromptSet::single_box(boxes.boxes[pos]));
    const BinaryMask m = (inst.label_map.array() == id).cast<std::uint8_t>();
    ep.targets.push_back(target_row(m, r));
  }
  return ep;
}

/// Objective over one episode, averaged over its prompt sets.
Var episode_objective(Binding<float>& binding, const ModelConfig& mc, const Episode& ep,
                      const ObjectiveWeights& w) {
  auto& g = binding.graph();
  ModelPass<float> pass(binding, mc, ep.image);
  Var total;
  const float inv = 1.0f / static_cast<float>(ep.prompts.size());
  for (std::size_t i = 0; i < ep.prompts.size(); ++i) {
    Var l = scale(g, prompt_objective(g, pass.decode(ep.prompts[i]), ep.targets[i], w), inv);
    total = total.valid() ? add(g, total, l) : l;
  }
  return total;
}

void check_samples(const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                   const char* which) {
  for (const auto& s : samples) {
    if (s.image.empty()) throw ConfigError(std::string(which) + " image '" + s.image_id + "' is empty");
    if (s.target.rows() != s.image.height || s.target.cols() != s.image.width)
      throw ConfigError(std::string(which) + " target for '" + s.image_id +
                        "' does not match the image size");
    if ((s.target.array() > 1).any())
      throw ConfigError(std::string(which) + " target for '" + s.image_id + "' is not binary");
    if (cfg.prompt_mode == PromptMode::kBoxes &&
        (s.instances.rows() != s.image.height || s.instances.cols() != s.image.width))
      throw ConfigError(std::string(which) + " sample '" + s.image_id +
                        "' needs an instance map for box-prompted training");
  }
}

ObjectiveWeights objective_weights(const TrainConfig& cfg) {
  return {cfg.loss_weights, cfg.quality_weight};
}

}  // namespace

double validation_loss(const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                       const ParameterSet<float>& params, const ModelConfig& mc) {
  if (samples.empty()) return 0.0;
  double sum = 0;
  int counted = 0;
  for (const auto& s : samples) {
    const Episode ep = make_episode(s, cfg, mc, false, false, nullptr);
    if (ep.prompts.empty()) continue;
    Graph<float> g;
    Binding<float> b(g, params);
    sum += g.value(episode_objective(b, mc, ep, objective_weights(cfg)))(0, 0);
    ++counted;
  }
  return counted ? sum / counted : 0.0;
}

RunResult finetune(const std::vector<TrainSample>& train, const std::vector<TrainSample>& val,
                   const TrainConfig& cfg, const ParameterSet<float>& init_params,
                   const ModelConfig& mc, const FinetuneOptions& options) {
  cfg.validate();
  mc.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  if (val.empty()) throw ConfigError("validation set is empty");
  check_samples(train, cfg, "training");
  check_samples(val, cfg, "validation");
  const bool any_annotated = std::any_of(train.begin(), train.end(), [](const TrainSample& s) {
    return (s.target.array() != 0).any();
  });
  if (!any_annotated) throw ConfigError("no annotated foreground in any training sample");

  RunResult result;
  result.model_config = mc;
  result.config = cfg;
  const ObjectiveWeights weights = objective_weights(cfg);

  for (const std::uint64_t seed : cfg.seeds) {
    ParameterSet<float> params = init_params;
    if (cfg.reinit_trainable)
      reinitialize_groups(params, mc, cfg.freeze_policy.trainable_groups, seed ^ 0x5eedULL);
    const std::vector<char> mask = trainable_mask(params, cfg.freeze_policy);
    const ParameterSet<float> start = params;
    AdamW<float> opt(params, mask, {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    std::mt19937_64 rng(seed);
    EarlyStopping stopper(cfg.patience);

    SeedRun run;
    run.seed = seed;
    run.best_params = params;

    std::vector<Mat<float>> grads(params.size());
    auto zero_grads = [&] {
      for (std::size_t i = 0; i < params.size(); ++i)
        if (mask[i]) grads[i] = Mat<float>::Zero(params[i].value.rows(), params[i].value.cols());
    };
    zero_grads();

    std::vector<std::size_t> order(train.size());
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      const double lr = cosine_learning_rate(cfg.learning_rate, epoch, cfg.max_epochs);
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0;
      int loss_count = 0, pending = 0;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const TrainSample& s = train[order[k]];
        bool hflip = false, vflip = false;
        if (cfg.augment_flips) {
          hflip = (rng() & 1) != 0;
          vflip = (rng() & 1) != 0;
        }
        const Episode ep = make_episode(s, cfg, mc, hflip, vflip, &rng);
        if (!ep.prompts.empty()) {
          Graph<float> g;
          Binding<float> b(g, params, mask);
          const Var loss = episode_objective(b, mc, ep, weights);
          const double v = g.value(loss)(0, 0);
          if (!std::isfinite(v))
            throw TrainingError("non-finite loss at seed " + std::to_string(seed) + ", epoch " +
                                std::to_string(epoch) + ", sample '" + s.image_id + "'");
          g.backward(loss);
          for (std::size_t i = 0; i < params.size(); ++i)
            if (mask[i]) grads[i] += b.gradient(i);
          loss_sum += v;
          ++loss_count;
          ++pending;
        }
        if (pending > 0 && (pending == cfg.batch_size || k + 1 == order.size())) {
          for (std::size_t i = 0; i < params.size(); ++i)
            if (mask[i]) grads[i] /= static_cast<float>(pending);
          opt.step(params, grads, lr);
          zero_grads();
          pending = 0;
        }
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.learning_rate = lr;
      rec.train_loss = loss_count ? loss_sum / loss_count : 0.0;
      rec.val_loss = validation_loss(val, cfg, params, mc);
      if (!std::isfinite(rec.val_loss))
        throw TrainingError("non-finite validation loss at seed " + std::to_string(seed) +
                            ", epoch " + std::to_string(epoch));
      run.curve.push_back(rec);
      if (stopper.update(rec.val_loss)) run.best_params = params;
      if (options.on_epoch) options.on_epoch(seed, rec);
      if (stopper.should_stop()) {
        run.stopped_early = true;
        break;
      }
    }
    run.best_epoch = stopper.best_epoch();
    run.best_val_loss = stopper.best_loss();

    for (std::size_t i = 0; i < params.size(); ++i)
      if (!mask[i] && !(params[i].value.array() == start[i].value.array()).all())
        throw TrainingError("frozen parameter '" + params[i].name + "' changed during training");

    run.checkpoint_id = checkpoint_id(run.best_params, mc);
    if (!options.checkpoint_dir.empty()) {
      std::filesystem::create_directories(options.checkpoint_dir);
      const auto path = options.checkpoint_dir / ("seed_" + std::to_string(seed) + ".ckpt");
      checkpoint_save(run.best_params, mc, path);
      run.checkpoint_path = path.string();
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

}  // namespace promptseg
