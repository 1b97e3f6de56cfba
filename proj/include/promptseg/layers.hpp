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

#include "promptseg/autograd.hpp"
#include "promptseg/parameters.hpp"

namespace promptseg {

template <typename S>
Var linear_p(Binding<S>& b, Var x, const std::string& prefix, bool bias = true) {
  return linear(b.graph(), x, b(prefix + ".weight"), bias ? b(prefix + ".bias") : Var{});
}

template <typename S>
Var layer_norm_p(Binding<S>& b, Var x, const std::string& prefix, S eps) {
  return layer_norm(b.graph(), x, b(prefix + ".weight"), b(prefix + ".bias"), eps);
}

/// Stack of `layers` linear maps named prefix.layers.{i}, ReLU in between.
template <typename S>
void add_mlp(ParameterSet<S>& ps, Initializer<S>& init, const std::string& prefix,
             ParamGroup group, int in, int hidden, int out, int layers) {
  for (int i = 0; i < layers; ++i) {
    const int a = i == 0 ? in : hidden;
    const int z = i == layers - 1 ? out : hidden;
    add_linear(ps, init, prefix + ".layers." + std::to_string(i), group, a, z);
  }
}

template <typename S>
Var mlp(Binding<S>& b, Var x, const std::string& prefix, int layers) {
  for (int i = 0; i < layers; ++i) {
    x = linear_p(b, x, prefix + ".layers." + std::to_string(i));
    if (i + 1 < layers) x = relu(b.graph(), x);
  }
  return x;
}

/// Scaled dot-product attention over head-wise column blocks of q, k, v.
template <typename S>
Var split_head_attention(Graph<S>& g, Var q, Var k, Var v, int heads) {
  const Eigen::Index dim = g.value(q).cols();
  const Eigen::Index head_dim = dim / heads;
  const S scale_factor = S(1) / std::sqrt(static_cast<S>(head_dim));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(g, q, h * head_dim, head_dim);
    Var kh = slice_cols(g, k, h * head_dim, head_dim);
    Var vh = slice_cols(g, v, h * head_dim, head_dim);
    Var att = softmax_rows(g, scale(g, matmul_nt(g, qh, kh), scale_factor));
    outs.push_back(matmul(g, att, vh));
  }
  return heads == 1 ? outs.front() : concat_cols(g, outs);
}

/// Attention with separate q/k/v/out projections and an internal width that
/// may be narrower than the embedding (decoder cross-attention).
template <typename S>
void add_attention(ParameterSet<S>& ps, Initializer<S>& init, const std::string& prefix,
                   ParamGroup group, int dim, int internal_dim) {
  add_linear(ps, init, prefix + ".q_proj", group, dim, internal_dim);
  add_linear(ps, init, prefix + ".k_proj", group, dim, internal_dim);
  add_linear(ps, init, prefix + ".v_proj", group, dim, internal_dim);
  add_linear(ps, init, prefix + ".out_proj", group, internal_dim, dim);
}

template <typename S>
Var attention(Binding<S>& b, Var q, Var k, Var v, const std::string& prefix, int heads) {
  Var qp = linear_p(b, q, prefix + ".q_proj");
  Var kp = linear_p(b, k, prefix + ".k_proj");
  Var vp = linear_p(b, v, prefix + ".v_proj");
  return linear_p(b, split_head_attention(b.graph(), qp, kp, vp, heads), prefix + ".out_proj");
}

}  // namespace promptseg
