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

// Brute-force reference implementations. They share no code with the
// library and favour obviousness over speed.

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "promptseg/image.hpp"

namespace promptseg::oracle {

struct Counts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count_pixels(const ProbMap& prob, const BinaryMask& gt, double threshold) {
  Counts c;
  for (int r = 0; r < gt.rows(); ++r)
    for (int col = 0; col < gt.cols(); ++col) {
      const bool p = prob(r, col) >= threshold;
      const bool t = gt(r, col) == 1;
      c.tp += p && t;
      c.fp += p && !t;
      c.fn += !p && t;
      c.tn += !p && !t;
    }
  return c;
}

inline double dice(const Counts& c) {
  const long den = 2 * c.tp + c.fp + c.fn;
  return den == 0 ? 1.0 : 2.0 * c.tp / den;
}
inline double iou(const Counts& c) {
  const long den = c.tp + c.fp + c.fn;
  return den == 0 ? 1.0 : double(c.tp) / den;
}
inline double recall(const Counts& c) {
  return c.tp + c.fn == 0 ? 1.0 : double(c.tp) / (c.tp + c.fn);
}
inline double precision(const Counts& c) {
  return c.tp + c.fp == 0 ? 1.0 : double(c.tp) / (c.tp + c.fp);
}

/// All (foreground, background) pairs: 1 for a correct order, 1/2 for a tie.
inline double auc_all_pairs(const ProbMap& prob, const BinaryMask& gt) {
  double score = 0;
  long pairs = 0;
  for (int i = 0; i < gt.size(); ++i) {
    if (gt.data()[i] != 1) continue;
    for (int j = 0; j < gt.size(); ++j) {
      if (gt.data()[j] != 0) continue;
      ++pairs;
      if (prob.data()[i] > prob.data()[j]) score += 1;
      else if (prob.data()[i] == prob.data()[j]) score += 0.5;
    }
  }
  return score / pairs;
}

/// Recounts every pixel for each distinct probability used as threshold.
inline double best_f1_sweep(const ProbMap& prob, const BinaryMask& gt) {
  std::set<float> values(prob.data(), prob.data() + prob.size());
  double best = 0;
  for (float t : values) {
    Counts c;
    for (int i = 0; i < gt.size(); ++i) {
      const bool p = prob.data()[i] >= t, g = gt.data()[i] == 1;
      c.tp += p && g;
      c.fp += p && !g;
      c.fn += !p && g;
    }
    best = std::max(best, 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn));
  }
  return best;
}

/// Hubert-Arabie pair-counting form over every unordered pixel pair.
inline double ari_pairs(const BinaryMask& a, const BinaryMask& b) {
  double same_same = 0, same_diff = 0, diff_same = 0, diff_diff = 0;
  for (int i = 0; i < a.size(); ++i)
    for (int j = i + 1; j < a.size(); ++j) {
      const bool sa = a.data()[i] == a.data()[j];
      const bool sb = b.data()[i] == b.data()[j];
      if (sa && sb) ++same_same;
      else if (sa) ++same_diff;
      else if (sb) ++diff_same;
      else ++diff_diff;
    }
  const double den = (diff_diff + same_diff) * (same_diff + same_same) +
                     (diff_diff + diff_same) * (diff_same + same_same);
  if (den == 0) return 1.0;
  return 2.0 * (diff_diff * same_same - same_diff * diff_same) / den;
}

/// Classic crossing-number point-in-polygon test.
inline bool point_in_polygon(const std::vector<std::pair<double, double>>& poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto [xi, yi] = poly[i];
    const auto [xj, yj] = poly[j];
    if (((yi > y) != (yj > y)) && (x < (xj - xi) * (y - yi) / (yj - yi) + xi)) inside = !inside;
  }
  return inside;
}

/// Counter replay of "stop after `patience` consecutive epochs without a
/// new minimum"; returns the epoch index at which training stops, or -1.
inline int early_stop_epoch(const std::vector<double>& history, int patience) {
  double best = std::numeric_limits<double>::infinity();
  int since = 0;
  for (std::size_t e = 0; e < history.size(); ++e) {
    if (history[e] < best) {
      best = history[e];
      since = 0;
    } else {
      ++since;
    }
    if (since >= patience) return static_cast<int>(e);
  }
  return -1;
}

}  // namespace promptseg::oracle
