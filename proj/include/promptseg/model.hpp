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
#include <random>
#include <set>
#include <vector>

#include "promptseg/image_encoder.hpp"
#include "promptseg/mask_decoder.hpp"
#include "promptseg/prompt_encoder.hpp"

namespace promptseg {

/// Per-candidate logits and probabilities at the model input resolution.
template <typename S>
struct SegmentationOutput {
  Mat<S> logits;     // candidates x (H*W)
  Mat<S> prob_maps;  // sigmoid(logits)
  std::vector<S> quality_pred;
  int height = 0;
  int width = 0;

  int candidates() const { return static_cast<int>(logits.rows()); }

  /// Index of the candidate with maximal predicted quality (first on ties).
  int best_candidate() const {
    int best = 0;
    for (int i = 1; i < static_cast<int>(quality_pred.size()); ++i)
      if (quality_pred[i] > quality_pred[best]) best = i;
    return best;
  }

  Eigen::Map<const Mat<S>> prob_map(int candidate) const {
    return {prob_maps.row(candidate).data(), height, width};
  }
  Eigen::Map<const Mat<S>> logit_map(int candidate) const {
    return {logits.row(candidate).data(), height, width};
  }
};

template <typename S>
S sigmoid(S x) {
  return x >= 0 ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

/// Fresh parameters for every group, fully determined by `seed`.
template <typename S>
ParameterSet<S> init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Initializer<S> init{rng};
  ParameterSet<S> ps;
  register_image_encoder(ps, init, cfg);
  register_prompt_encoder(ps, init, cfg);
  register_mask_decoder(ps, init, cfg);
  return ps;
}

/// Replaces every parameter in `groups` by a fresh initialization from `seed`.
template <typename S>
void reinitialize_groups(ParameterSet<S>& params, const ModelConfig& cfg,
                         const std::set<ParamGroup>& groups, std::uint64_t seed) {
  const ParameterSet<S> fresh = init_parameters<S>(cfg, seed);
  for (auto& p : params)
    if (groups.count(p.group)) p.value = fresh.at(p.name).value;
}

/// Encodes an image once and decodes any number of prompt sets against it
/// on a caller-owned graph (training uses this to share the encoder pass).
template <typename S>
class ModelPass {
 public:
  ModelPass(Binding<S>& binding, const ModelConfig& cfg, const PreparedImage<S>& image)
      : binding_(binding), cfg_(cfg), width_(image.source_width), height_(image.source_height) {
    embedding_ = encode_image(binding_, cfg_, image);
    image_pe_ = image_positional_encoding(binding_.params(), cfg_);
  }

  /// Reuses an image embedding computed earlier (as a constant).
  ModelPass(Binding<S>& binding, const ModelConfig& cfg, const Mat<S>& embedding,
            int source_width, int source_height)
      : binding_(binding), cfg_(cfg), width_(source_width), height_(source_height) {
    embedding_ = binding_.graph().constant(embedding);
    image_pe_ = image_positional_encoding(binding_.params(), cfg_);
  }

  DecodedVars<S> decode(const PromptSet& prompts) {
    prompts.validate(width_, height_);
    EncodedPrompts<S> enc = encode_prompts(binding_, cfg_, prompts, width_, height_);
    return decode_masks(binding_, cfg_, embedding_, image_pe_, enc);
  }

  Var embedding() const { return embedding_; }

  SegmentationOutput<S> output(const DecodedVars<S>& vars) const {
    auto& g = binding_.graph();
    SegmentationOutput<S> out;
    out.logits = g.value(vars.logits);
    out.prob_maps = out.logits.unaryExpr([](S v) { return sigmoid(v); });
    const auto& q = g.value(vars.quality);
    out.quality_pred.assign(q.data(), q.data() + q.size());
    out.height = out.width = cfg_.input_resolution;
    return out;
  }

 private:
  Binding<S>& binding_;
  const ModelConfig& cfg_;
  int width_, height_;
  Var embedding_;
  Mat<S> image_pe_;
};

/// Inference on already-prepared inputs; one output per prompt set.
template <typename S>
std::vector<SegmentationOutput<S>> forward_many(const PreparedImage<S>& image,
                                                const std::vector<PromptSet>& prompt_sets,
                                                const ModelConfig& cfg,
                                                const ParameterSet<S>& params) {
  Graph<S> graph;
  Binding<S> binding(graph, params);
  ModelPass<S> pass(binding, cfg, image);
  std::vector<SegmentationOutput<S>> outs;
  outs.reserve(prompt_sets.size());
  for (const auto& prompts : prompt_sets) outs.push_back(pass.output(pass.decode(prompts)));
  return outs;
}

template <typename S>
SegmentationOutput<S> forward(const PreparedImage<S>& image, const PromptSet& prompts,
                              const ModelConfig& cfg, const ParameterSet<S>& params) {
  return std::move(forward_many<S>(image, {prompts}, cfg, params).front());
}

/// Resizes and normalizes `image`, then runs the model. Prompt coordinates
/// refer to the original image.
template <typename S>
SegmentationOutput<S> forward(const RgbImage& image, const PromptSet& prompts,
                              const ModelConfig& cfg, const ParameterSet<S>& params) {
  prompts.validate(image.width, image.height);
  return forward<S>(prepare_image<S>(image, cfg), prompts, cfg, params);
}

/// Prompt-free inference: the prompt encoder contributes only its learned
/// no-prompt embedding.
template <typename S>
SegmentationOutput<S> forward_promptless(const RgbImage& image, const ModelConfig& cfg,
                                         const ParameterSet<S>& params) {
  return forward<S>(image, PromptSet{}, cfg, params);
}

template <typename S>
SegmentationOutput<S> forward_promptless(const PreparedImage<S>& image, const ModelConfig& cfg,
                                         const ParameterSet<S>& params) {
  return forward<S>(image, PromptSet{}, cfg, params);
}

}  // namespace promptseg
