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

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "promptseg/annotation_xml.hpp"
#include "promptseg/checkpoint.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/evaluation.hpp"
#include "promptseg/png_io.hpp"
#include "promptseg/service.hpp"
#include "promptseg/synth.hpp"
#include "promptseg/workspace.hpp"

namespace promptseg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string workdir;
  std::string out;

  json config() const {
    if (config_path.empty()) return json::object();
    try {
      json j = json::parse(read_file(config_path));
      if (!j.is_object()) throw ConfigError(config_path + ": configuration must be a JSON object");
      return j;
    } catch (const json::exception& e) {
      throw ConfigError(config_path + ": " + e.what());
    }
  }
  json section(const char* name) const {
    const json c = config();
    return c.contains(name) ? c.at(name) : json::object();
  }
  Workspace workspace() const { return Workspace(workdir.empty() ? Workspace::default_root() : fs::path(workdir)); }
  fs::path out_dir(const Workspace& ws, const std::string& fallback) const {
    return out.empty() ? ws.runs_dir() / fallback : fs::path(out);
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON configuration file");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--workdir", args.workdir, "workspace root (default: $WORKDIR or ./workdir)");
  cmd->add_option("--out", args.out, "output directory");
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::vector<std::string> ids_in(const SplitAssignment& s, std::initializer_list<Split> splits) {
  std::vector<std::string> out;
  for (Split sp : splits)
    for (const auto& id : s.ids(sp)) out.push_back(id);
  return out;
}

// ---- ingest -----------------------------------------------------------------

json cmd_ingest(const CommonArgs& args, const std::string& src, const std::string& split_file) {
  Workspace ws = args.workspace();
  const json split_cfg = args.section("split");
  std::vector<std::string> pool, test, warnings;
  auto ingest_dir = [&](const fs::path& dir, std::vector<std::string>& ids) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string id = f.stem().string();
      if (!valid_image_id(id)) throw ConfigError("invalid image id derived from " + f.string());
      const RgbImage img = read_rgb_png(f);
      ws.save_image(id, img);
      const fs::path xml = fs::path(f).replace_extension(".xml");
      if (fs::exists(xml)) {
        std::vector<std::string> w;
        ws.save_labels(parse_annotation_xml(read_file(xml), img.width, img.height, id, &w));
        warnings.insert(warnings.end(), w.begin(), w.end());
      } else {
        warnings.push_back(id + ": no annotation document");
      }
      ids.push_back(id);
    }
  };
  if (!fs::is_directory(src)) throw IoError("source directory '" + src + "' does not exist");
  if (fs::is_directory(fs::path(src) / "train")) {
    ingest_dir(fs::path(src) / "train", pool);
    if (fs::is_directory(fs::path(src) / "test")) ingest_dir(fs::path(src) / "test", test);
  } else {
    ingest_dir(src, pool);
  }
  SplitConfig sc;
  sc.val_fraction = split_cfg.value("val_fraction", sc.val_fraction);
  if (!split_file.empty()) sc.split_file = read_file(split_file);
  const SplitAssignment splits = make_splits(pool, test, sc);
  ws.save_splits(splits);
  return {{"images", pool.size() + test.size()},
          {"train", splits.count(Split::kTrain)},
          {"val", splits.count(Split::kVal)},
          {"test", splits.count(Split::kTest)},
          {"warnings", warnings}};
}

// ---- synth ------------------------------------------------------------------

json cmd_synth(const CommonArgs& args) {
  Workspace ws = args.workspace();
  const json cfg = args.section("synth");
  const int count = cfg.value("count", 40);
  const int test_count = cfg.value("test_count", 10);
  const int size = cfg.value("size", 128);
  const std::uint64_t seed = args.seed.value_or(cfg.value("seed", std::uint64_t{0}));
  std::vector<std::string> pool, test;
  auto store = [&](const std::vector<SynthSample>& samples, std::vector<std::string>& ids) {
    for (const auto& s : samples) {
      ws.save_image(s.image.image_id, s.image.pixels);
      ws.save_labels(s.labels);
      ids.push_back(s.image.image_id);
    }
  };
  store(synth_generate(count, size, seed, "synth"), pool);
  store(synth_generate(test_count, size, seed + 1000003, "synthtest"), test);
  SplitConfig sc;
  sc.val_fraction = args.section("split").value("val_fraction", sc.val_fraction);
  const SplitAssignment splits = make_splits(pool, test, sc);
  ws.save_splits(splits);
  return {{"images", count + test_count},
          {"train", splits.count(Split::kTrain)},
          {"val", splits.count(Split::kVal)},
          {"test", splits.count(Split::kTest)},
          {"workdir", ws.root().string()}};
}

// ---- make-weak --------------------------------------------------------------

json cmd_make_weak(const CommonArgs& args) {
  Workspace ws = args.workspace();
  const SplitAssignment splits = ws.load_splits();
  std::vector<std::string> warnings;
  int written = 0;
  for (const auto& id : ids_in(splits, {Split::kTrain, Split::kVal})) {
    if (!ws.has_labels(id)) {
      warnings.push_back(id + ": no label map; skipped");
      continue;
    }
    ws.save_weak(boxes_from_instances(ws.load_labels(id), &warnings));
    ++written;
  }
  return {{"annotations", written}, {"warnings", warnings}};
}

// ---- pseudolabel ------------------------------------------------------------

PseudoLabelConfig pseudolabel_config(const CommonArgs& args) {
  const json j = args.section("pseudolabel");
  PseudoLabelConfig c;
  c.threshold = j.value("threshold", c.threshold);
  c.expand_ratio = j.value("expand_ratio", c.expand_ratio);
  if (!(c.threshold > 0 && c.threshold < 1)) throw ConfigError("pseudolabel threshold must lie in (0, 1)");
  if (c.expand_ratio < 0) throw ConfigError("pseudolabel expand_ratio must be non-negative");
  return c;
}

json cmd_pseudolabel(const CommonArgs& args, const std::string& checkpoint, int workers) {
  Workspace ws = args.workspace();
  const auto model = SamSegmenter::from_checkpoint(checkpoint);
  const SplitAssignment splits = ws.load_splits();
  std::vector<ImageSample> images;
  std::map<std::string, WeakAnnotation> annotations;
  for (const auto& id : ids_in(splits, {Split::kTrain, Split::kVal})) {
    images.push_back({id, ws.load_image(id), splits.split_of.at(id)});
    if (ws.has_weak(id)) annotations[id] = ws.load_weak(id);
  }
  const BatchResult r = pseudolabel_batch(images, annotations, *model, pseudolabel_config(args),
                                          &ws.pseudolabels(), workers);
  json errors = json::array();
  for (const auto& e : r.errors) errors.push_back({{"image_id", e.image_id}, {"message", e.message}});
  return {{"pseudolabels", r.labels.size()}, {"checkpoint_id", model->model_id()}, {"errors", errors}};
}

// ---- finetune ---------------------------------------------------------------

TrainConfig train_config(const CommonArgs& args, Preset preset) {
  const json c = args.config();
  TrainConfig tc = default_train_config(preset);
  const json& j = c.contains("train") ? c.at("train") : c;
  json only_train = j;
  for (const char* other : {"pseudolabel", "synth", "split", "service", "model"}) only_train.erase(other);
  from_json(only_train, tc);
  return tc;
}

std::vector<TrainSample> load_samples(const Workspace& ws, const std::vector<std::string>& ids,
                                      LabelSource source) {
  std::vector<TrainSample> out;
  for (const auto& id : ids) {
    TrainSample s;
    s.image_id = id;
    s.image = ws.load_image(id);
    if (source == LabelSource::kComplete) {
      s.instances = ws.load_labels(id).label_map;
      s.target = foreground(s.instances);
    } else {
      if (!ws.pseudolabels().contains(id))
        throw ConfigError("no pseudo-label for image '" + id + "'; run pseudolabel first");
      s.target = ws.pseudolabels().load(id).mask;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrainSample> apply_regime(const std::vector<TrainSample>& samples, const CropRegime& regime) {
  std::vector<AnnotatedSample> annotated;
  for (const auto& s : samples) {
    AnnotatedSample a;
    a.image = {s.image_id, s.image, Split::kTrain};
    a.labels.image_id = s.image_id;
    // Keep instance ids when available, otherwise the semantic target.
    a.labels.label_map = s.instances.size() ? s.instances : LabelMap(s.target.cast<std::int32_t>());
    a.labels.instance_count = a.labels.label_map.size() ? a.labels.label_map.maxCoeff() : 0;
    annotated.push_back(std::move(a));
  }
  std::vector<TrainSample> out;
  for (auto& a : apply_crop_regime(annotated, regime)) {
    TrainSample s;
    s.image_id = a.image.image_id;
    s.image = std::move(a.image.pixels);
    s.target = foreground(a.labels.label_map);
    s.instances = std::move(a.labels.label_map);
    out.push_back(std::move(s));
  }
  return out;
}

json cmd_finetune(const CommonArgs& args, const std::string& checkpoint, const std::string& preset,
                  const std::string& labels, const std::string& regime_name) {
  Workspace ws = args.workspace();
  ModelConfig mc;
  ParameterSet<float> init;
  std::string init_id = "fresh";
  if (!checkpoint.empty()) {
    LoadedCheckpoint<float> ck = checkpoint_load<float>(checkpoint);
    mc = ck.config;
    init = std::move(ck.params);
    init_id = ck.checkpoint_id;
  } else {
    mc = config_for(preset_from_string(preset));
    init = init_parameters<float>(mc, args.seed.value_or(0));
  }
  TrainConfig tc = train_config(args, mc.preset);
  if (!labels.empty()) tc.label_source = label_source_from_string(labels);
  if (!regime_name.empty()) tc.regime = regime_from_string(regime_name);
  if (args.seed) tc.seeds = {*args.seed};
  if (tc.label_source == LabelSource::kWeak && tc.prompt_mode == PromptMode::kBoxes)
    throw ConfigError("box-prompted training needs complete instance labels");
  tc.validate();

  const SplitAssignment splits = ws.load_splits();
  std::vector<TrainSample> train = load_samples(ws, splits.ids(Split::kTrain), tc.label_source);
  const std::vector<TrainSample> val = load_samples(ws, splits.ids(Split::kVal), tc.label_source);

  const fs::path out = args.out_dir(ws, to_string(tc.label_source) + "_" + to_string(tc.regime));
  fs::create_directories(out);
  std::vector<ImageExtent> extents;
  for (const auto& s : train) extents.push_back({s.image_id, s.image.width, s.image.height});
  const int crop = args.section("regime").value("crop_size", 200);
  const CropRegime regime = make_crop_regime(tc.regime, extents, args.seed.value_or(0), crop);
  write_json(out / "regime.json", {{"regime", regime}, {"annotated_fraction", annotated_fraction(regime, extents)}});
  train = apply_regime(train, regime);

  std::ofstream curves(out / "curves.jsonl", std::ios::trunc);
  FinetuneOptions opt;
  opt.checkpoint_dir = out;
  opt.on_epoch = [&](std::uint64_t seed, const EpochRecord& r) {
    json line = r;
    line["seed"] = seed;
    curves << line.dump() << "\n" << std::flush;
  };
  const RunResult result = finetune(train, val, tc, init, mc, opt);
  json run = result;
  run["init_checkpoint_id"] = init_id;
  write_json(out / "run.json", run);
  json seeds = json::array();
  for (const auto& r : result.runs)
    seeds.push_back({{"seed", r.seed}, {"best_epoch", r.best_epoch}, {"checkpoint", r.checkpoint_path}});
  return {{"run", (out / "run.json").string()}, {"seeds", seeds}};
}

// ---- evaluate ---------------------------------------------------------------

std::vector<EvalSample> eval_samples(const Workspace& ws, Split split) {
  std::vector<EvalSample> out;
  for (const auto& id : ws.load_splits().ids(split)) {
    EvalSample s;
    s.image_id = id;
    s.image = ws.load_image(id);
    if (ws.has_labels(id)) s.ground_truth = foreground(ws.load_labels(id).label_map);
    out.push_back(std::move(s));
  }
  return out;
}

json cmd_evaluate(const CommonArgs& args, const std::string& checkpoint, const std::string& run_dir,
                  const std::string& split_name, double threshold, int workers) {
  Workspace ws = args.workspace();
  const std::vector<EvalSample> samples = eval_samples(ws, split_from_string(split_name));
  if (!checkpoint.empty()) {
    if (!fs::exists(checkpoint)) throw LoadError("checkpoint '" + checkpoint + "' does not exist");
    const MetricReport report = evaluate_checkpoint(checkpoint, samples, threshold, workers);
    const fs::path out = args.out_dir(ws, "eval");
    json j = report;
    j["checkpoint"] = checkpoint;
    write_json(out / "report.json", j);
    return {{"report", (out / "report.json").string()}, {"mean", report.mean()}};
  }
  const fs::path run_path = fs::path(run_dir) / "run.json";
  if (!fs::exists(run_path)) throw LoadError("run file '" + run_path.string() + "' does not exist");
  json run = json::parse(read_file(run_path));
  std::vector<MetricSummary> means;
  for (auto& seed_run : run.at("runs")) {
    const std::string ck = seed_run.at("checkpoint_path").get<std::string>();
    if (ck.empty() || !fs::exists(ck)) throw LoadError("checkpoint '" + ck + "' does not exist");
    const MetricReport report = evaluate_checkpoint(ck, samples, threshold, workers);
    seed_run["report"] = report;
    means.push_back(report.mean());
  }
  run["mean"] = mean_of(means);
  write_json(run_path, run);
  return {{"run", run_path.string()}, {"mean", run["mean"]}};
}

// ---- report -----------------------------------------------------------------

json cmd_report(const CommonArgs& args, const std::vector<std::string>& run_dirs) {
  Workspace ws = args.workspace();
  std::vector<ComparisonRow> rows;
  json table = json::array();
  for (const auto& dir : run_dirs) {
    const fs::path path = fs::path(dir) / "run.json";
    if (!fs::exists(path)) throw LoadError("run file '" + path.string() + "' does not exist");
    const json run = json::parse(read_file(path));
    ComparisonRow row;
    row.method = args.section("report").value("method", std::string("adapter finetune"));
    row.regime = run.at("train_config").at("regime").get<std::string>();
    row.label_source = run.at("train_config").at("label_source").get<std::string>();
    for (const auto& r : run.at("runs")) {
      if (r.at("report").is_null())
        throw ConfigError(path.string() + ": seed " + r.at("seed").dump() + " has no report; run evaluate first");
      row.seeds.push_back(r.at("report").get<MetricReport>().mean());
    }
    table.push_back({{"run", dir},
                     {"regime", row.regime},
                     {"label_source", row.label_source},
                     {"seeds", row.seeds},
                     {"mean", mean_of(row.seeds)}});
    rows.push_back(std::move(row));
  }
  const std::string markdown = format_comparison_table(rows);
  const fs::path out = args.out_dir(ws, "report");
  write_file_atomic(out / "table.md", markdown);
  write_json(out / "table.json", table);
  return {{"table", (out / "table.md").string()}, {"rows", table}};
}

// ---- serve ------------------------------------------------------------------

int cmd_serve(const CommonArgs& args, const std::string& checkpoint, const std::string& host,
              int port, std::ostream& out) {
  const json cfg = args.section("service");
  ServiceConfig sc;
  sc.max_boxes = cfg.value("max_boxes", sc.max_boxes);
  sc.workers = cfg.value("workers", sc.workers);
  sc.pseudolabel = pseudolabel_config(args);
  auto ws = std::make_shared<Workspace>(args.workdir.empty() ? Workspace::default_root() : fs::path(args.workdir));
  Service service(ws, sc);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int bound = service.bind(host, port);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  out << json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;

  std::thread loader([&] {
    try {
      service.set_model(SamSegmenter::from_checkpoint(checkpoint));
    } catch (const std::exception& e) {
      std::cerr << json{{"error", "load_error"}, {"message", e.what()}}.dump() << std::endl;
    }
  });
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.run();
  loader.join();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"promptseg: weak-label nuclei segmentation pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonArgs args;
  std::string src, split_file, checkpoint, preset = "tiny", labels, regime, run_dir;
  std::string split_name = "test", host = "127.0.0.1";
  std::vector<std::string> run_dirs;
  int workers = 1, port = 8080;
  double threshold = 0.5;

  auto* ingest = app.add_subcommand("ingest", "import images and polygon annotations");
  add_common(ingest, args);
  ingest->add_option("--src", src, "directory with train/ and test/ (PNG + XML)")->required();
  ingest->add_option("--split-file", split_file, "explicit split assignment");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, args);

  auto* weak = app.add_subcommand("make-weak", "derive box annotations from label maps");
  add_common(weak, args);

  auto* pseudo = app.add_subcommand("pseudolabel", "box-prompted pseudo-label generation");
  add_common(pseudo, args);
  pseudo->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  pseudo->add_option("--workers", workers, "parallel images");

  auto* tune = app.add_subcommand("finetune", "train under a label source and regime");
  add_common(tune, args);
  tune->add_option("--checkpoint", checkpoint, "initial parameters");
  tune->add_option("--preset", preset, "fresh model preset when no checkpoint is given")
      ->check(CLI::IsMember({"tiny", "full"}));
  tune->add_option("--labels", labels, "label source")->check(CLI::IsMember({"complete", "weak"}));
  tune->add_option("--regime", regime, "annotation budget")->check(CLI::IsMember({"full", "pct4", "pct0_5"}));

  auto* eval = app.add_subcommand("evaluate", "prompt-free evaluation");
  add_common(eval, args);
  auto* eval_ck = eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  auto* eval_run = eval->add_option("--run", run_dir, "finetune output directory");
  eval_ck->excludes(eval_run);
  eval->add_option("--split", split_name, "split")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--threshold", threshold, "binarization threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--workers", workers, "parallel images");

  auto* report = app.add_subcommand("report", "comparison table over evaluated runs");
  add_common(report, args);
  report->add_option("--run", run_dirs, "evaluated finetune output directories")->required();

  auto* serve = app.add_subcommand("serve", "HTTP service");
  add_common(serve, args);
  serve->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 = any)");

  try {
    app.parse(argc, argv);
    if (*eval && checkpoint.empty() && run_dir.empty())
      throw CLI::RequiredError("evaluate needs --checkpoint or --run");
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    json result;
    if (*ingest) result = cmd_ingest(args, src, split_file);
    else if (*synth) result = cmd_synth(args);
    else if (*weak) result = cmd_make_weak(args);
    else if (*pseudo) result = cmd_pseudolabel(args, checkpoint, workers);
    else if (*tune) result = cmd_finetune(args, checkpoint, preset, labels, regime);
    else if (*eval) result = cmd_evaluate(args, checkpoint, run_dir, split_name, threshold, workers);
    else if (*report) result = cmd_report(args, run_dirs);
    else if (*serve) return cmd_serve(args, checkpoint, host, port, out);
    result["command"] = command;
    out << result.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    err << json{{"error", e.kind()}, {"command", command}, {"message", e.what()}}.dump() << "\n";
  } catch (const json::exception& e) {
    err << json{{"error", "parse_error"}, {"command", command}, {"message", e.what()}}.dump() << "\n";
  } catch (const std::exception& e) {
    err << json{{"error", "error"}, {"command", command}, {"message", e.what()}}.dump() << "\n";
  }
  return 1;
}

}  // namespace promptseg
