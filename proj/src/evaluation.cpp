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

#include "promptseg/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace promptseg {

MetricReport evaluate_split(const Segmenter& model, const std::vector<EvalSample>& samples,
                            double threshold, int workers) {
  const std::size_t n = samples.size();
  std::vector<std::optional<ImageMetrics>> rows(n);
  std::vector<std::string> reasons(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const EvalSample& s = samples[i];
      if (!s.ground_truth) {
        reasons[i] = "missing ground truth";
        continue;
      }
      if (s.ground_truth->rows() != s.image.height || s.ground_truth->cols() != s.image.width) {
        reasons[i] = "ground truth size does not match the image";
        continue;
      }
      try {
        auto session = model.open(s.image);
        const MaskPrediction pred = session->predict(PromptSet{});
        rows[i] = compute_image_metrics(s.image_id, pred.prob, *s.ground_truth, threshold);
      } catch (const std::exception& e) {
        reasons[i] = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  MetricReport report;
  report.threshold = threshold;
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i]) report.images.push_back(std::move(*rows[i]));
    else report.excluded.push_back({samples[i].image_id, reasons[i]});
  }
  return report;
}

MetricReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                 const std::vector<EvalSample>& samples, double threshold,
                                 int workers) {
  const auto model = SamSegmenter::from_checkpoint(checkpoint);
  return evaluate_split(*model, samples, threshold, workers);
}

void evaluate_runs(RunResult& result, const std::vector<EvalSample>& samples, double threshold,
                   int workers) {
  for (auto& run : result.runs) {
    const SamSegmenter model(result.model_config, run.best_params, run.checkpoint_id);
    run.report = evaluate_split(model, samples, threshold, workers);
  }
}

}  // namespace promptseg
