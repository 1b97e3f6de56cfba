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
#include <vector>

#include "promptseg/model.hpp"

namespace promptseg {

struct LossWeights {
  double bce_weight = 1.0;
  double iou_weight = 1.0;
};

namespace detail {

inline void require_binary_target(const auto& target) {
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const auto t = target.data()[i];
    if (t != 0 && t != 1) throw InvalidArgument("training target must be binary");
  }
}

/// Balanced BCE plus soft IoU on one logit row; optionally the gradient
/// with respect to the logits.
template <typename S>
double segmentation_loss(const S* z, const S* t, Eigen::Index n, const LossWeights& w,
                         S* grad = nullptr) {
  constexpr double kEps = 1e-10;
  constexpr double kSmooth = 1e-6;
  double pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) pos += t[i];
  const double count_pos = pos + kEps;
  const double count_neg = static_cast<double>(n) - pos;
  const double pos_weight = count_neg / count_pos;
  const double w_neg = count_pos / (count_pos + count_neg);

  double bce = 0, inter = 0, psum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = z[i], ti = t[i];
    // log(sigmoid(z)) = -softplus(-z), log(1 - sigmoid(z)) = -softplus(z)
    const double sp_pos = std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi)));
    const double sp_neg = sp_pos - zi;
    bce += pos_weight * ti * sp_neg + (1 - ti) * sp_pos;
    const double p = zi >= 0 ? 1 / (1 + std::exp(-zi)) : std::exp(zi) / (1 + std::exp(zi));
    inter += p * ti;
    psum += p;
  }
  const double union_ = psum + pos - inter;
  const double bce_loss = w_neg * bce / static_cast<double>(n);
  const double iou_loss = 1 - (inter + kSmooth) / (union_ + kSmooth);
  if (grad) {
    const double u2 = (union_ + kSmooth) * (union_ + kSmooth);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zi = z[i], ti = t[i];
      const double p = zi >= 0 ? 1 / (1 + std::exp(-zi)) : std::exp(zi) / (1 + std::exp(zi));
      const double d_bce = w_neg / static_cast<double>(n) * (p * (pos_weight * ti + 1 - ti) - pos_weight * ti);
      const double d_iou_dp = -(ti * (union_ + kSmooth) - (inter + kSmooth) * (1 - ti)) / u2;
      grad[i] = static_cast<S>(w.bce_weight * d_bce + w.iou_weight * d_iou_dp * p * (1 - p));
    }
  }
  return w.bce_weight * bce_loss + w.iou_weight * iou_loss;
}

}  // namespace detail

/// bce_weight * balanced BCE + iou_weight * (1 - soft IoU) on the candidate
/// with maximal predicted quality. `target` matches the output maps.
template <typename S>
S training_loss(const SegmentationOutput<S>& output, const BinaryMask& target,
                const LossWeights& weights = {}) {
  if (target.rows() != output.height || target.cols() != output.width)
    throw ShapeError("training target does not match the output maps");
  detail::require_binary_target(target);
  const Mat<S> t = target.cast<S>();
  const int k = output.best_candidate();
  return static_cast<S>(
      detail::segmentation_loss<S>(output.logits.row(k).data(), t.data(), t.size(), weights));
}

/// Differentiable segmentation loss on a 1 x N logit row.
template <typename S>
Var segmentation_loss(Graph<S>& g, Var logits_row, const Mat<S>& target_row,
                      const LossWeights& weights) {
  const Mat<S>& z = g.value(logits_row);
  if (z.rows() != 1 || z.cols() != target_row.size())
    throw ShapeError("segmentation_loss: logits and target disagree");
  Mat<S> grad(1, z.cols());
  const double v = detail::segmentation_loss<S>(z.data(), target_row.data(), z.cols(), weights,
                                                grad.data());
  Mat<S> out(1, 1);
  out(0, 0) = static_cast<S>(v);
  return g.record(std::move(out), g.requires_grad(logits_row),
                  [logits_row, grad = std::move(grad)](Graph<S>& g, const Mat<S>& go) {
                    g.accumulate(logits_row, grad * go(0, 0));
                  });
}

/// Mean squared error of a 1 x M row against a constant target.
template <typename S>
Var mse_loss(Graph<S>& g, Var x, const Mat<S>& target) {
  const Mat<S> diff = g.value(x) - target;
  Mat<S> out(1, 1);
  out(0, 0) = diff.squaredNorm() / static_cast<S>(diff.size());
  return g.record(std::move(out), g.requires_grad(x),
                  [x, diff](Graph<S>& g, const Mat<S>& go) {
                    g.accumulate(x, diff * (S(2) * go(0, 0) / static_cast<S>(diff.size())));
                  });
}

/// Non-differentiable choices made from the forward values: which candidate
/// is supervised, and each candidate's actual IoU (quality-head target).
template <typename S>
struct CandidateSelection {
  int candidate = 0;
  Mat<S> quality_target;
};

template <typename S>
CandidateSelection<S> select_candidate(const Graph<S>& g, const DecodedVars<S>& vars,
                                       const Mat<S>& target_row) {
  const Mat<S>& logits = g.value(vars.logits);
  const Mat<S>& q = g.value(vars.quality);
  CandidateSelection<S> sel;
  for (Eigen::Index i = 1; i < q.cols(); ++i)
    if (q(0, i) > q(0, sel.candidate)) sel.candidate = static_cast<int>(i);
  sel.quality_target.resize(1, logits.rows());
  for (Eigen::Index m = 0; m < logits.rows(); ++m) {
    double inter = 0, uni = 0;
    for (Eigen::Index i = 0; i < logits.cols(); ++i) {
      const bool p = logits(m, i) >= 0, t = target_row(0, i) > 0.5;
      inter += p && t;
      uni += p || t;
    }
    sel.quality_target(0, m) = static_cast<S>(uni == 0 ? 1.0 : inter / uni);
  }
  return sel;
}

struct ObjectiveWeights {
  LossWeights loss;
  double quality_weight = 1.0;
};

/// Loss for one decoded prompt set: segmentation loss on the selected
/// candidate plus the quality-head regression term.
template <typename S>
Var prompt_objective(Graph<S>& g, const DecodedVars<S>& vars, const Mat<S>& target_row,
                     const ObjectiveWeights& w, const CandidateSelection<S>& sel) {
  Var logits = slice_rows(g, vars.logits, sel.candidate, 1);
  Var loss = segmentation_loss(g, logits, target_row, w.loss);
  if (w.quality_weight != 0)
    loss = add(g, loss, scale(g, mse_loss(g, vars.quality, sel.quality_target),
                              static_cast<S>(w.quality_weight)));
  return loss;
}

template <typename S>
Var prompt_objective(Graph<S>& g, const DecodedVars<S>& vars, const Mat<S>& target_row,
                     const ObjectiveWeights& w) {
  return prompt_objective(g, vars, target_row, w, select_candidate(g, vars, target_row));
}

}  // namespace promptseg
