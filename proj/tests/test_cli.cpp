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


#include "promptseg/pipeline.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "promptseg/metrics.hpp"
#include "promptseg/pseudolabel.hpp"
#include "promptseg/synth.hpp"
#include "promptseg/png_io.hpp"

namespace promptseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int status = 0;
  std::string out, err;
  json out_json() const { return json::parse(out); }
  json err_json() const { return json::parse(err); }
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "promptseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("promptseg_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    work = (root / "work").string();
    config = (root / "config.json").string();
    std::ofstream(config) << R"({
      "synth": {"count": 6, "test_count": 3, "size": 64},
      "split": {"val_fraction": 0.34},
      "train": {"max_epochs": 2, "patience": 2, "seeds": [0, 1, 2], "learning_rate": 0.001}
    })";
  }
  void TearDown() override { fs::remove_all(root); }

  fs::path root;
  std::string work, config;
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  CliResult r = run({"frobnicate"});
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.err_json().at("error"), "usage");
  EXPECT_EQ(run({}).status, 2);
  EXPECT_EQ(run({"finetune", "--regime", "pct7"}).status, 2);
  EXPECT_EQ(run({"synth", "--no-such-flag"}).status, 2);
  EXPECT_EQ(run({"evaluate", "--workdir", work}).status, 2);
  EXPECT_EQ(run({"pseudolabel", "--workdir", work}).status, 2);
  EXPECT_EQ(run({"synth", "--help"}).status, 0);
}

TEST_F(CliTest, EveryCommandAcceptsSeedAndConfig) {
  for (const char* cmd : {"ingest", "synth", "make-weak", "pseudolabel", "finetune", "evaluate",
                          "report", "serve"}) {
    const CliResult r = run({cmd, "--help"});
    EXPECT_EQ(r.status, 0) << cmd;
    EXPECT_NE(r.out.find("--seed"), std::string::npos) << cmd;
    EXPECT_NE(r.out.find("--config"), std::string::npos) << cmd;
  }
}

TEST_F(CliTest, StageFailuresExitOneAndNameThePath) {
  const std::string missing = (root / "nowhere" / "model.ckpt").string();
  ASSERT_EQ(run({"synth", "--workdir", work, "--config", config, "--seed", "1"}).status, 0);
  CliResult r = run({"evaluate", "--workdir", work, "--checkpoint", missing});
  EXPECT_EQ(r.status, 1);
  const json e = r.err_json();
  EXPECT_EQ(e.at("command"), "evaluate");
  EXPECT_NE(e.at("message").get<std::string>().find(missing), std::string::npos);

  r = run({"pseudolabel", "--workdir", work, "--checkpoint", missing});
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.err_json().at("error"), "load_error");
  r = run({"ingest", "--workdir", work, "--src", (root / "absent").string()});
  EXPECT_EQ(r.status, 1);
  r = run({"finetune", "--workdir", work, "--config", (root / "absent.json").string()});
  EXPECT_EQ(r.status, 1);
  r = run({"finetune", "--workdir", work, "--labels", "weak"});
  EXPECT_EQ(r.status, 1);  // no pseudo-labels yet
}

TEST_F(CliTest, SynthFinetuneEvaluateReport) {
  CliResult r = run({"synth", "--workdir", work, "--config", config, "--seed", "3"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out_json().at("test"), 3);

  r = run({"finetune", "--workdir", work, "--config", config, "--preset", "tiny", "--out",
           (root / "run").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "run" / "run.json"));
  EXPECT_TRUE(fs::exists(root / "run" / "curves.jsonl"));
  for (int s = 0; s < 3; ++s) EXPECT_TRUE(fs::exists(root / "run" / ("seed_" + std::to_string(s) + ".ckpt")));

  r = run({"evaluate", "--workdir", work, "--run", (root / "run").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const json run_json = json::parse(read_file(root / "run" / "run.json"));
  std::vector<MetricSummary> seeds;
  for (const auto& s : run_json.at("runs")) {
    const MetricReport rep = s.at("report").get<MetricReport>();
    EXPECT_EQ(rep.images.size(), 3u);
    seeds.push_back(rep.mean());
  }
  ASSERT_EQ(seeds.size(), 3u);

  r = run({"evaluate", "--workdir", work, "--checkpoint", (root / "run" / "seed_1.ckpt").string(),
           "--out", (root / "eval").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const MetricReport single = json::parse(read_file(root / "eval" / "report.json")).get<MetricReport>();
  EXPECT_DOUBLE_EQ(single.mean().dice, seeds[1].dice);

  r = run({"report", "--workdir", work, "--run", (root / "run").string(), "--out",
           (root / "report").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const json table = json::parse(read_file(root / "report" / "table.json"));
  ASSERT_EQ(table.size(), 1u);
  const json mean = table[0].at("mean");
  const double dice_mean = (seeds[0].dice + seeds[1].dice + seeds[2].dice) / 3;
  const double iou_mean = (seeds[0].iou + seeds[1].iou + seeds[2].iou) / 3;
  EXPECT_NEAR(mean.at("dice").get<double>(), dice_mean, 1e-12);
  EXPECT_NEAR(mean.at("iou").get<double>(), iou_mean, 1e-12);
  EXPECT_NEAR(mean.at("recall").get<double>(),
              (seeds[0].recall + seeds[1].recall + seeds[2].recall) / 3, 1e-12);
  const std::string md = read_file(root / "report" / "table.md");
  char cell[32];
  std::snprintf(cell, sizeof cell, "| %.2f |", 100 * dice_mean);
  EXPECT_NE(md.find(std::string("| full | complete ") + cell), std::string::npos) << md;
}

TEST_F(CliTest, WeakLabelStagesAreIdempotent) {
  ASSERT_EQ(run({"synth", "--workdir", work, "--config", config}).status, 0);
  CliResult r = run({"make-weak", "--workdir", work});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out_json().at("annotations"), 6);
  r = run({"finetune", "--workdir", work, "--config", config, "--seed", "0", "--out",
           (root / "pre").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const std::string ckpt = (root / "pre" / "seed_0.ckpt").string();

  r = run({"pseudolabel", "--workdir", work, "--checkpoint", ckpt, "--workers", "2"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out_json().at("pseudolabels"), 6);
  PseudoLabelStore store(fs::path(work) / "pseudolabels");
  std::map<std::string, std::string> first;
  for (const auto& id : store.ids()) first[id] = read_file(store.mask_path(id)) + read_file(store.sidecar_path(id));
  ASSERT_EQ(first.size(), 6u);
  ASSERT_EQ(run({"pseudolabel", "--workdir", work, "--checkpoint", ckpt}).status, 0);
  for (const auto& [id, bytes] : first)
    EXPECT_EQ(read_file(store.mask_path(id)) + read_file(store.sidecar_path(id)), bytes) << id;

  r = run({"finetune", "--workdir", work, "--config", config, "--checkpoint", ckpt, "--labels", "weak",
           "--seed", "4", "--out", (root / "weak").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const json run_json = json::parse(read_file(root / "weak" / "run.json"));
  EXPECT_EQ(run_json.at("train_config").at("label_source"), "weak");
  EXPECT_EQ(run_json.at("runs").size(), 1u);
}

TEST_F(CliTest, IngestReadsPolygonDocuments) {
  const fs::path src = root / "src";
  fs::create_directories(src / "train");
  fs::create_directories(src / "test");
  const auto samples = synth_generate(4, 32, 1);
  const std::string doc =
      "<Annotations><Annotation><Regions><Region><Vertices>"
      "<Vertex X=\"4\" Y=\"4\"/><Vertex X=\"12\" Y=\"4\"/><Vertex X=\"12\" Y=\"12\"/>"
      "</Vertices></Region></Regions></Annotation></Annotations>";
  for (int i = 0; i < 4; ++i) {
    const fs::path dir = src / (i < 3 ? "train" : "test");
    write_rgb_png(dir / (samples[i].image.image_id + ".png"), samples[i].image.pixels);
    std::ofstream(dir / (samples[i].image.image_id + ".xml")) << doc;
  }
  const CliResult r = run({"ingest", "--workdir", work, "--src", src.string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const json j = r.out_json();
  EXPECT_EQ(j.at("images"), 4);
  EXPECT_EQ(j.at("test"), 1);
  EXPECT_EQ(j.at("train").get<int>() + j.at("val").get<int>(), 3);
  EXPECT_TRUE(fs::exists(fs::path(work) / "labels" / (samples[0].image.image_id + ".png")));
  EXPECT_EQ(read_label_png(fs::path(work) / "labels" / (samples[0].image.image_id + ".png")).maxCoeff(), 1);
}

TEST_F(CliTest, WorkdirDefaultsToEnvironment) {
  ::setenv("WORKDIR", work.c_str(), 1);
  const CliResult r = run({"synth", "--config", config});
  ::unsetenv("WORKDIR");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(fs::path(work) / "splits.txt"));
}

TEST_F(CliTest, BinaryReportsExitStatus) {
  const std::string bin = PROMPTSEG_CLI_PATH;
  const int bogus = std::system((bin + " frobnicate > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(bogus));
  EXPECT_EQ(WEXITSTATUS(bogus), 2);
  const int missing = std::system((bin + " evaluate --workdir " + work +
                                   " --checkpoint /nonexistent.ckpt > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(missing));
  EXPECT_EQ(WEXITSTATUS(missing), 1);
}

}  // namespace
}  // namespace promptseg
