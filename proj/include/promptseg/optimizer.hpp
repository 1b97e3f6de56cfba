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

#include <cmath>
#include <numbers>
#include <vector>

#include "promptseg/parameters.hpp"

namespace promptseg {

struct AdamWConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Cosine decay from `base` at epoch 0 to zero at `total_epochs`.
inline double cosine_learning_rate(double base, int epoch, int total_epochs) {
  if (total_epochs <= 0) return base;
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

/// Decoupled weight decay Adam over the parameters selected by `mask`;
/// everything else is never touched.
template <typename S>
class AdamW {
 public:
  AdamW(const ParameterSet<S>& params, std::vector<char> mask, AdamWConfig cfg = {})
      : mask_(std::move(mask)), cfg_(cfg), m_(params.size()), v_(params.size()) {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (mask_[i]) {
        m_[i] = Mat<S>::Zero(params[i].value.rows(), params[i].value.cols());
        v_[i] = m_[i];
      }
  }

  void step(ParameterSet<S>& params, const std::vector<Mat<S>>& grads, double lr) {
    ++t_;
    const double bc1 = 1 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1 - std::pow(cfg_.beta2, t_);
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!mask_[i]) continue;
      auto& w = params[i].value;
      const auto& g = grads[i];
      w *= static_cast<S>(1 - lr * cfg_.weight_decay);
      m_[i] = b1 * m_[i] + (1 - b1) * g;
      v_[i] = b2 * v_[i] + (1 - b2) * g.cwiseProduct(g);
      const S step = static_cast<S>(lr / bc1);
      const S denom_scale = static_cast<S>(1 / std::sqrt(bc2));
      w.array() -= step * m_[i].array() /
                   (v_[i].array().sqrt() * denom_scale + static_cast<S>(cfg_.eps));
    }
  }

  int steps() const { return t_; }

 private:
  std::vector<char> mask_;
  AdamWConfig cfg_;
  std::vector<Mat<S>> m_, v_;
  int t_ = 0;
};

}  // namespace promptseg
