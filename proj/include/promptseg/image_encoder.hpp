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

#include "promptseg/layers.hpp"
#include "promptseg/model_config.hpp"
#include "promptseg/preprocess.hpp"

namespace promptseg {

// Patchified ViT backbone with a convolutional neck, plus explicit-prompt
// adapters: a shared embedder of the image's high-frequency component feeds a
// per-layer bottleneck whose output is added to that layer's input tokens.

template <typename S>
void register_image_encoder(ParameterSet<S>& ps, Initializer<S>& init, const ModelConfig& cfg) {
  const auto bb = ParamGroup::kEncoderBackbone;
  const int d = cfg.encoder_dim;
  const int patch_in = 3 * cfg.patch_size * cfg.patch_size;
  add_linear(ps, init, "image_encoder.patch_embed.proj", bb, patch_in, d);
  ps.add("image_encoder.pos_embed", bb, init.normal(cfg.tokens(), d, 0.02));
  for (int i = 0; i < cfg.encoder_depth; ++i) {
    const std::string p = "image_encoder.blocks." + std::to_string(i);
    add_layer_norm(ps, p + ".norm1", bb, d);
    add_linear(ps, init, p + ".attn.qkv", bb, d, 3 * d);
    add_linear(ps, init, p + ".attn.proj", bb, d, d);
    add_layer_norm(ps, p + ".norm2", bb, d);
    add_linear(ps, init, p + ".mlp.lin1", bb, d, 4 * d);
    add_linear(ps, init, p + ".mlp.lin2", bb, 4 * d, d);
  }
  add_linear(ps, init, "image_encoder.neck.0", bb, d, cfg.neck_dim, false);
  add_layer_norm(ps, "image_encoder.neck.1", bb, cfg.neck_dim);
  add_linear(ps, init, "image_encoder.neck.2", bb, 9 * cfg.neck_dim, cfg.neck_dim, false);
  add_layer_norm(ps, "image_encoder.neck.3", bb, cfg.neck_dim);

  const auto ad = ParamGroup::kAdapters;
  const int a = cfg.adapter_dim;
  add_linear(ps, init, "image_encoder.prompt_generator.hfc_embed", ad, patch_in, a);
  for (int i = 0; i < cfg.encoder_depth; ++i) {
    const std::string p = "image_encoder.prompt_generator.";
    add_linear(ps, init, p + "lightweight_mlp_" + std::to_string(i), ad, a, a);
    if (!cfg.adapter_shared_up) add_linear(ps, init, p + "up_" + std::to_string(i), ad, a, d);
  }
  if (cfg.adapter_shared_up)
    add_linear(ps, init, "image_encoder.prompt_generator.shared_mlp", ad, a, d);
}

template <typename S>
Var encoder_block(Binding<S>& b, Var x, const std::string& p, int heads) {
  auto& g = b.graph();
  const S eps = S(1e-6);
  const Eigen::Index d = g.value(x).cols();
  Var y = layer_norm_p(b, x, p + ".norm1", eps);
  Var qkv = linear_p(b, y, p + ".attn.qkv");
  Var q = slice_cols(g, qkv, 0, d);
  Var k = slice_cols(g, qkv, d, d);
  Var v = slice_cols(g, qkv, 2 * d, d);
  Var att = linear_p(b, split_head_attention(g, q, k, v, heads), p + ".attn.proj");
  x = add(g, x, att);
  y = layer_norm_p(b, x, p + ".norm2", eps);
  y = linear_p(b, gelu(g, linear_p(b, y, p + ".mlp.lin1")), p + ".mlp.lin2");
  return add(g, x, y);
}

/// Returns the image embedding, (grid*grid x neck_dim).
template <typename S>
Var encode_image(Binding<S>& b, const ModelConfig& cfg, const PreparedImage<S>& in) {
  auto& g = b.graph();
  if (in.patches.rows() != cfg.tokens()) throw ShapeError("patch count does not match config");
  Var x = linear_p(b, g.constant(in.patches), "image_encoder.patch_embed.proj");
  x = add(g, x, b("image_encoder.pos_embed"));

  const std::string pg = "image_encoder.prompt_generator.";
  Var hfc = linear_p(b, g.constant(in.hfc_patches), pg + "hfc_embed");
  for (int i = 0; i < cfg.encoder_depth; ++i) {
    const std::string idx = std::to_string(i);
    Var h = gelu(g, linear_p(b, hfc, pg + "lightweight_mlp_" + idx));
    Var prompt = linear_p(b, h, cfg.adapter_shared_up ? pg + "shared_mlp" : pg + "up_" + idx);
    x = add(g, x, prompt);
    x = encoder_block(b, x, "image_encoder.blocks." + idx, cfg.encoder_heads);
  }

  const S eps = S(1e-6);
  x = linear_p(b, x, "image_encoder.neck.0", false);
  x = layer_norm_p(b, x, "image_encoder.neck.1", eps);
  x = linear_p(b, im2col3x3(g, x, cfg.grid(), cfg.grid()), "image_encoder.neck.2", false);
  return layer_norm_p(b, x, "image_encoder.neck.3", eps);
}

}  // namespace promptseg
