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

#include <numbers>
#include <string>
#include <vector>

#include "promptseg/layers.hpp"
#include "promptseg/model_config.hpp"
#include "promptseg/prompts.hpp"

namespace promptseg {

// Sparse prompts become tokens: random-Fourier positional encoding of the
// coordinate plus a learned type embedding (negative point, positive point,
// box top-left, box bottom-right). Absence of a dense prior maps to a learned
// no-prior embedding broadcast over the image grid.

inline constexpr int kMaskInChannels = 16;

template <typename S>
void register_prompt_encoder(ParameterSet<S>& ps, Initializer<S>& init, const ModelConfig& cfg) {
  const auto pe = ParamGroup::kPromptEncoder;
  const int e = cfg.neck_dim;
  ps.add("prompt_encoder.pe_layer.positional_encoding_gaussian_matrix", pe,
         init.normal(2, e / 2, 1.0), /*buffer=*/true);
  for (int i = 0; i < 4; ++i)
    ps.add("prompt_encoder.point_embeddings." + std::to_string(i), pe, init.normal(1, e, 1.0));
  ps.add("prompt_encoder.not_a_point_embed", pe, init.normal(1, e, 1.0));
  ps.add("prompt_encoder.no_mask_embed", pe, init.normal(1, e, 1.0));
  const int c1 = kMaskInChannels / 4;
  add_linear(ps, init, "prompt_encoder.mask_downscaling.0", pe, 4, c1);
  add_layer_norm(ps, "prompt_encoder.mask_downscaling.1", pe, c1);
  add_linear(ps, init, "prompt_encoder.mask_downscaling.3", pe, 4 * c1, kMaskInChannels);
  add_layer_norm(ps, "prompt_encoder.mask_downscaling.4", pe, kMaskInChannels);
  add_linear(ps, init, "prompt_encoder.mask_downscaling.6", pe, kMaskInChannels, e);
}

/// Random-Fourier encoding of normalized (x, y) rows in [0, 1]^2.
template <typename S>
Mat<S> fourier_encode(const Mat<S>& coords01, const Mat<S>& gaussian) {
  Mat<S> projected = ((coords01.array() * S(2)) - S(1)).matrix() * gaussian;
  projected *= S(2) * std::numbers::pi_v<S>;
  Mat<S> out(projected.rows(), projected.cols() * 2);
  out.leftCols(projected.cols()) = projected.array().sin().matrix();
  out.rightCols(projected.cols()) = projected.array().cos().matrix();
  return out;
}

/// Dense positional encoding of the embedding grid, (grid*grid x neck_dim).
template <typename S>
Mat<S> image_positional_encoding(const ParameterSet<S>& ps, const ModelConfig& cfg) {
  const int g = cfg.grid();
  Mat<S> coords(Eigen::Index(g) * g, 2);
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x) {
      coords(Eigen::Index(y) * g + x, 0) = (S(x) + S(0.5)) / S(g);
      coords(Eigen::Index(y) * g + x, 1) = (S(y) + S(0.5)) / S(g);
    }
  return fourier_encode<S>(
      coords, ps.at("prompt_encoder.pe_layer.positional_encoding_gaussian_matrix").value);
}

template <typename S>
struct EncodedPrompts {
  Var sparse;  // (n x E); invalid when there are no sparse prompts
  Var dense;   // (grid*grid x E)
};

template <typename S>
EncodedPrompts<S> encode_prompts(Binding<S>& b, const ModelConfig& cfg, const PromptSet& prompts,
                                 int image_width, int image_height) {
  auto& g = b.graph();
  const Mat<S>& gaussian =
      b.params().at("prompt_encoder.pe_layer.positional_encoding_gaussian_matrix").value;
  const S r = S(cfg.input_resolution);
  const S sx = r / S(image_width), sy = r / S(image_height);

  // Pixel-centre coordinates in model input space, normalized to [0, 1].
  auto encode_xy = [&](double x, double y) {
    Mat<S> c(1, 2);
    c(0, 0) = (S(x) * sx + S(0.5)) / r;
    c(0, 1) = (S(y) * sy + S(0.5)) / r;
    return fourier_encode<S>(c, gaussian);
  };

  std::vector<Var> tokens;
  for (const auto& p : prompts.points) {
    Var pe = g.constant(encode_xy(p.x, p.y));
    tokens.push_back(
        add(g, pe, b("prompt_encoder.point_embeddings." + std::string(p.foreground ? "1" : "0"))));
  }
  if (!prompts.points.empty() && prompts.boxes.empty())
    tokens.push_back(b("prompt_encoder.not_a_point_embed"));  // padding point
  for (const auto& box : prompts.boxes) {
    tokens.push_back(add(g, g.constant(encode_xy(box.x0, box.y0)),
                         b("prompt_encoder.point_embeddings.2")));
    tokens.push_back(add(g, g.constant(encode_xy(box.x1, box.y1)),
                         b("prompt_encoder.point_embeddings.3")));
  }

  EncodedPrompts<S> out;
  if (!tokens.empty()) out.sparse = concat_rows(g, tokens);

  const int grid = cfg.grid();
  if (prompts.dense_prior) {
    const auto& prior = *prompts.dense_prior;
    const int side = cfg.mask_side();
    if (prior.rows() != side || prior.cols() != side)
      throw ShapeError("dense prior must be " + std::to_string(side) + "x" + std::to_string(side));
    Mat<S> flat(Eigen::Index(side) * side, 1);
    for (Eigen::Index i = 0; i < flat.rows(); ++i) flat(i, 0) = S(prior.data()[i]);
    const std::string p = "prompt_encoder.mask_downscaling.";
    Var x = space_to_depth(g, g.constant(flat), side, side, 2);
    x = gelu(g, layer_norm_p(b, linear_p(b, x, p + "0"), p + "1", S(1e-6)));
    x = space_to_depth(g, x, side / 2, side / 2, 2);
    x = gelu(g, layer_norm_p(b, linear_p(b, x, p + "3"), p + "4", S(1e-6)));
    out.dense = linear_p(b, x, p + "6");
  } else {
    out.dense = repeat_row(g, b("prompt_encoder.no_mask_embed"), Eigen::Index(grid) * grid);
  }
  return out;
}

}  // namespace promptseg
