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

#include <limits>
#include <vector>

namespace promptseg {

enum class StopDecision { kContinue, kStop };

/// Stop iff (last epoch index) - (index of the first strict minimum) >=
/// patience. Throws InvalidArgument on an empty history or patience < 1.
StopDecision early_stop_check(const std::vector<double>& val_loss_history, int patience);

/// Incremental form of early_stop_check that also tracks the best epoch.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  /// Records one epoch; returns true when it is a new strict minimum.
  bool update(double val_loss);
  bool should_stop() const;
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  int epochs() const { return epochs_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = -1;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

}  // namespace promptseg
