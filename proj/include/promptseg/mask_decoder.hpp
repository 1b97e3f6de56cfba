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

#include <string>
#include <vector>

#include "promptseg/layers.hpp"
#include "promptseg/model_config.hpp"
#include "promptseg/prompt_encoder.hpp"

namespace promptseg {

// Two-way transformer decoder: output tokens (quality + one per candidate
// mask) and prompt tokens attend to the image embedding and back. The image
// embedding is upscaled 4x by two transposed convolutions and each mask token
// is mapped by its own hypernetwork MLP onto per-pixel weights.

template <typename S>
void register_mask_decoder(ParameterSet<S>& ps, Initializer<S>& init, const ModelConfig& cfg) {
  const auto md = ParamGroup::kMaskDecoder;
  const int e = cfg.neck_dim;
  const int m = cfg.multimask_count;
  ps.add("mask_decoder.iou_token", md, init.normal(1, e, 1.0));
  ps.add("mask_decoder.mask_tokens", md, init.normal(m, e, 1.0));
  for (int l = 0; l < cfg.decoder_depth; ++l) {
    const std::string p = "mask_decoder.transformer.layers." + std::to_string(l);
    add_attention(ps, init, p + ".self_attn", md, e, e);
    add_layer_norm(ps, p + ".norm1", md, e);
    add_attention(ps, init, p + ".cross_attn_token_to_image", md, e, e / 2);
    add_layer_norm(ps, p + ".norm2", md, e);
    add_linear(ps, init, p + ".mlp.lin1", md, e, cfg.decoder_mlp_dim);
    add_linear(ps, init, p + ".mlp.lin2", md, cfg.decoder_mlp_dim, e);
    add_layer_norm(ps, p + ".norm3", md, e);
    add_layer_norm(ps, p + ".norm4", md, e);
    add_attention(ps, init, p + ".cross_attn_image_to_token", md, e, e / 2);
  }
  add_attention(ps, init, "mask_decoder.transformer.final_attn_token_to_image", md, e, e / 2);
  add_layer_norm(ps, "mask_decoder.transformer.norm_final_attn", md, e);

  add_linear(ps, init, "mask_decoder.output_upscaling.0", md, e, (e / 4) * 4, false);
  ps.add("mask_decoder.output_upscaling.0.bias", md, init.uniform_fan_in(1, e / 4, e));
  add_layer_norm(ps, "mask_decoder.output_upscaling.1", md, e / 4);
  add_linear(ps, init, "mask_decoder.output_upscaling.3", md, e / 4, (e / 8) * 4, false);
  ps.add("mask_decoder.output_upscaling.3.bias", md, init.uniform_fan_in(1, e / 8, e / 4));
  for (int i = 0; i < m; ++i)
    add_mlp(ps, init, "mask_decoder.output_hypernetworks_mlps." + std::to_string(i), md, e, e,
            e / 8, 3);
  add_mlp(ps, init, "mask_decoder.iou_prediction_head", md, e, cfg.iou_head_hidden, m, 3);
}

template <typename S>
struct DecodedVars {
  Var logits;   // (multimask x R*R)
  Var quality;  // (1 x multimask)
};

template <typename S>
DecodedVars<S> decode_masks(Binding<S>& b, const ModelConfig& cfg, Var image_embedding,
                            const Mat<S>& image_pe, const EncodedPrompts<S>& prompts) {
  auto& g = b.graph();
  const int heads = cfg.decoder_heads;
  const S eps = S(1e-5);
  const int m = cfg.multimask_count;

  std::vector<Var> token_parts = {b("mask_decoder.iou_token"), b("mask_decoder.mask_tokens")};
  if (prompts.sparse.valid()) token_parts.push_back(prompts.sparse);
  Var tokens = concat_rows(g, token_parts);

  Var keys = add(g, image_embedding, prompts.dense);
  Var key_pe = g.constant(image_pe);
  Var queries = tokens;

  for (int l = 0; l < cfg.decoder_depth; ++l) {
    const std::string p = "mask_decoder.transformer.layers." + std::to_string(l);
    if (l == 0) {
      queries = attention(b, queries, queries, queries, p + ".self_attn", heads);
    } else {
      Var q = add(g, queries, tokens);
      queries = add(g, queries, attention(b, q, q, queries, p + ".self_attn", heads));
    }
    queries = layer_norm_p(b, queries, p + ".norm1", eps);

    Var q = add(g, queries, tokens);
    Var k = add(g, keys, key_pe);
    queries = add(g, queries, attention(b, q, k, keys, p + ".cross_attn_token_to_image", heads));
    queries = layer_norm_p(b, queries, p + ".norm2", eps);

    Var hidden = relu(g, linear_p(b, queries, p + ".mlp.lin1"));
    queries = add(g, queries, linear_p(b, hidden, p + ".mlp.lin2"));
    queries = layer_norm_p(b, queries, p + ".norm3", eps);

    q = add(g, queries, tokens);
    k = add(g, keys, key_pe);
    keys = add(g, keys, attention(b, k, q, queries, p + ".cross_attn_image_to_token", heads));
    keys = layer_norm_p(b, keys, p + ".norm4", eps);
  }
  {
    const std::string p = "mask_decoder.transformer.";
    Var q = add(g, queries, tokens);
    Var k = add(g, keys, key_pe);
    queries = add(g, queries, attention(b, q, k, keys, p + "final_attn_token_to_image", heads));
    queries = layer_norm_p(b, queries, p + "norm_final_attn", eps);
  }

  const int grid = cfg.grid();
  const std::string up = "mask_decoder.output_upscaling.";
  Var x = linear_p(b, keys, up + "0", false);
  x = add_row(g, depth_to_space(g, x, grid, grid, 2), b(up + "0.bias"));
  x = gelu(g, layer_norm_p(b, x, up + "1", S(1e-6)));
  x = linear_p(b, x, up + "3", false);
  x = add_row(g, depth_to_space(g, x, 2 * grid, 2 * grid, 2), b(up + "3.bias"));
  Var upscaled = gelu(g, x);  // (16*grid^2 x E/8)

  std::vector<Var> hyper;
  hyper.reserve(m);
  for (int i = 0; i < m; ++i) {
    Var token = slice_rows(g, queries, 1 + i, 1);
    hyper.push_back(mlp(b, token, "mask_decoder.output_hypernetworks_mlps." + std::to_string(i), 3));
  }
  Var low_res = matmul_nt(g, concat_rows(g, hyper), upscaled);
  const int side = cfg.mask_side();
  DecodedVars<S> out;
  out.logits = resize_rows_bilinear(g, low_res, side, side, cfg.input_resolution,
                                    cfg.input_resolution);
  out.quality = mlp(b, slice_rows(g, queries, 0, 1), "mask_decoder.iou_prediction_head", 3);
  return out;
}

}  // namespace promptseg
