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

#include "promptseg/segmenter.hpp"

#include "promptseg/checkpoint.hpp"

namespace promptseg {

ProbMap resize_to_source(const Eigen::Map<const Mat<float>>& map, int width, int height) {
  if (map.rows() == height && map.cols() == width) return map;
  return resize_bilinear<float>(map, height, width);
}

namespace {

class SamSession final : public SegmenterSession {
 public:
  SamSession(const SamSegmenter& model, const RgbImage& image)
      : model_(model), width_(image.width), height_(image.height) {
    const PreparedImage<float> prepared = prepare_image<float>(image, model.config());
    Graph<float> graph;
    Binding<float> binding(graph, model.parameters());
    embedding_ = graph.value(encode_image(binding, model.config(), prepared));
  }

  int width() const override { return width_; }
  int height() const override { return height_; }

  MaskPrediction predict(const PromptSet& prompts) override {
    Graph<float> graph;
    Binding<float> binding(graph, model_.parameters());
    ModelPass<float> pass(binding, model_.config(), embedding_, width_, height_);
    const SegmentationOutput<float> out = pass.output(pass.decode(prompts));
    MaskPrediction pred;
    pred.candidate = out.best_candidate();
    pred.quality = out.quality_pred[pred.candidate];
    pred.prob = resize_to_source(out.prob_map(pred.candidate), width_, height_);
    return pred;
  }

 private:
  const SamSegmenter& model_;
  int width_, height_;
  Mat<float> embedding_;
};

}  // namespace

SamSegmenter::SamSegmenter(ModelConfig cfg, ParameterSet<float> params, std::string model_id)
    : cfg_(std::move(cfg)), params_(std::move(params)), id_(std::move(model_id)) {
  cfg_.validate();
}

std::shared_ptr<SamSegmenter> SamSegmenter::from_checkpoint(const std::filesystem::path& path) {
  LoadedCheckpoint<float> ck = checkpoint_load<float>(path);
  return std::make_shared<SamSegmenter>(ck.config, std::move(ck.params), ck.checkpoint_id);
}

std::unique_ptr<SegmenterSession> SamSegmenter::open(const RgbImage& image) const {
  if (image.empty()) throw InvalidArgument("empty image");
  return std::make_unique<SamSession>(*this, image);
}

}  // namespace promptseg
