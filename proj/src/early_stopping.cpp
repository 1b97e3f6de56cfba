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

#include "promptseg/early_stopping.hpp"

#include "promptseg/errors.hpp"

namespace promptseg {

StopDecision early_stop_check(const std::vector<double>& history, int patience) {
  if (history.empty()) throw InvalidArgument("early_stop_check: empty history");
  if (patience < 1) throw InvalidArgument("patience must be at least 1");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i] < history[best]) best = i;
  const std::size_t current = history.size() - 1;
  return current - best >= static_cast<std::size_t>(patience) ? StopDecision::kStop
                                                               : StopDecision::kContinue;
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw InvalidArgument("patience must be at least 1");
}

bool EarlyStopping::update(double val_loss) {
  const int epoch = epochs_++;
  if (best_epoch_ < 0 || val_loss < best_loss_) {
    best_epoch_ = epoch;
    best_loss_ = val_loss;
    return true;
  }
  return false;
}

bool EarlyStopping::should_stop() const {
  return epochs_ > 0 && (epochs_ - 1) - best_epoch_ >= patience_;
}

}  // namespace promptseg
