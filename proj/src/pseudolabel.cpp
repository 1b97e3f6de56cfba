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

#include "promptseg/pseudolabel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "promptseg/errors.hpp"
#include "promptseg/png_io.hpp"

namespace promptseg {

WeakAnnotation boxes_from_instances(const InstanceMaskSet& instances,
                                    std::vector<std::string>* warnings) {
  WeakAnnotation out;
  out.image_id = instances.image_id;
  const LabelMap& lm = instances.label_map;
  const int max_id = lm.size() ? std::max(lm.maxCoeff(), instances.instance_count)
                               : instances.instance_count;
  if (max_id <= 0) return out;
  std::vector<Box> boxes(max_id + 1, Box{INT32_MAX, INT32_MAX, -1, -1});
  for (int y = 0; y < lm.rows(); ++y)
    for (int x = 0; x < lm.cols(); ++x) {
      const int id = lm(y, x);
      if (id <= 0) continue;
      Box& b = boxes[id];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  for (int id = 1; id <= max_id; ++id) {
    if (boxes[id].x1 < 0) {
      if (warnings)
        warnings->push_back(instances.image_id + ": instance " + std::to_string(id) +
                            " has no pixels; skipped");
      continue;
    }
    out.boxes.push_back(boxes[id]);
  }
  return out;
}

Box expand_box(const Box& box, double ratio, int image_width, int image_height) {
  const double dx = ratio * box.width(), dy = ratio * box.height();
  Box e;
  e.x0 = std::max(0, static_cast<int>(std::floor(box.x0 - dx)));
  e.y0 = std::max(0, static_cast<int>(std::floor(box.y0 - dy)));
  e.x1 = std::min(image_width - 1, static_cast<int>(std::ceil(box.x1 + dx)));
  e.y1 = std::min(image_height - 1, static_cast<int>(std::ceil(box.y1 + dy)));
  return e;
}

PseudoLabel generate_pseudo_mask(SegmenterSession& session, const WeakAnnotation& annotation,
                                 const std::string& model_id, const PseudoLabelConfig& config) {
  const int w = session.width(), h = session.height();
  for (std::size_t i = 0; i < annotation.boxes.size(); ++i)
    if (!annotation.boxes[i].valid_in(w, h))
      throw InvalidArgument("box " + std::to_string(i) + " lies outside the image or is inverted");

  PseudoLabel out;
  out.image_id = annotation.image_id;
  out.boxes = annotation.boxes;
  out.mask = BinaryMask::Zero(h, w);
  out.provenance = {model_id, config.threshold, config.expand_ratio, "max_quality", "box_prompt"};
  for (std::size_t i = 0; i < annotation.boxes.size(); ++i) {
    MaskPrediction pred;
    try {
      pred = session.predict(PromptSet::single_box(annotation.boxes[i]));
    } catch (const std::exception& e) {
      throw InferenceError("box " + std::to_string(i) + ": " + e.what(), static_cast<int>(i));
    }
    if (pred.prob.rows() != h || pred.prob.cols() != w)
      throw InferenceError("box " + std::to_string(i) + ": prediction has the wrong shape",
                           static_cast<int>(i));
    const Box e = expand_box(annotation.boxes[i], config.expand_ratio, w, h);
    for (int y = e.y0; y <= e.y1; ++y)
      for (int x = e.x0; x <= e.x1; ++x)
        if (static_cast<double>(pred.prob(y, x)) >= config.threshold) out.mask(y, x) = 1;
    out.per_box_confidence.push_back(pred.quality);
  }
  return out;
}

PseudoLabel generate_pseudo_mask(const RgbImage& image, const WeakAnnotation& annotation,
                                 const Segmenter& model, const PseudoLabelConfig& config) {
  for (std::size_t i = 0; i < annotation.boxes.size(); ++i)
    if (!annotation.boxes[i].valid_in(image.width, image.height))
      throw InvalidArgument("box " + std::to_string(i) + " lies outside the image or is inverted");
  if (annotation.boxes.empty()) {
    PseudoLabel out;
    out.image_id = annotation.image_id;
    out.mask = BinaryMask::Zero(image.height, image.width);
    out.provenance = {model.model_id(), config.threshold, config.expand_ratio, "max_quality",
                      "box_prompt"};
    return out;
  }
  auto session = model.open(image);
  return generate_pseudo_mask(*session, annotation, model.model_id(), config);
}

void to_json(nlohmann::json& j, const Box& b) { j = {b.x0, b.y0, b.x1, b.y1}; }

void from_json(const nlohmann::json& j, Box& b) {
  if (!j.is_array() || j.size() != 4) throw ParseError("a box must be [x0, y0, x1, y1]");
  for (const auto& v : j)
    if (!v.is_number_integer()) throw ParseError("box coordinates must be integers");
  b = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

void to_json(nlohmann::json& j, const WeakAnnotation& a) {
  j = {{"image_id", a.image_id}, {"boxes", a.boxes}};
}

void from_json(const nlohmann::json& j, WeakAnnotation& a) {
  a.image_id = j.at("image_id").get<std::string>();
  a.boxes = j.at("boxes").get<std::vector<Box>>();
}

void to_json(nlohmann::json& j, const Provenance& p) {
  j = {{"checkpoint_id", p.checkpoint_id}, {"threshold", p.threshold},
       {"expand_ratio", p.expand_ratio},   {"selection", p.selection},
       {"source", p.source}};
}

void from_json(const nlohmann::json& j, Provenance& p) {
  p.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  p.threshold = j.value("threshold", 0.5);
  p.expand_ratio = j.value("expand_ratio", 0.1);
  p.selection = j.value("selection", std::string("max_quality"));
  p.source = j.value("source", std::string("box_prompt"));
}

nlohmann::json pseudolabel_sidecar(const PseudoLabel& label) {
  return {{"schema", "promptseg.pseudolabel/1"},
          {"image_id", label.image_id},
          {"width", label.mask.cols()},
          {"height", label.mask.rows()},
          {"mask_file", label.image_id + ".png"},
          {"boxes", label.boxes},
          {"per_box_confidence", label.per_box_confidence},
          {"provenance", label.provenance}};
}

PseudoLabel parse_pseudolabel_sidecar(const nlohmann::json& sidecar) {
  try {
    if (!sidecar.is_object()) throw ParseError("sidecar must be an object");
    if (sidecar.value("schema", std::string()) != "promptseg.pseudolabel/1")
      throw ParseError("unsupported sidecar schema");
    PseudoLabel out;
    out.image_id = sidecar.at("image_id").get<std::string>();
    if (out.image_id.empty()) throw ParseError("empty image_id");
    const int w = sidecar.at("width").get<int>();
    const int h = sidecar.at("height").get<int>();
    if (w <= 0 || h <= 0) throw ParseError("width and height must be positive");
    out.boxes = sidecar.at("boxes").get<std::vector<Box>>();
    out.per_box_confidence = sidecar.at("per_box_confidence").get<std::vector<double>>();
    if (out.per_box_confidence.size() != out.boxes.size())
      throw ParseError("per_box_confidence must align with boxes");
    for (std::size_t i = 0; i < out.boxes.size(); ++i)
      if (!out.boxes[i].valid_in(w, h))
        throw ParseError("box " + std::to_string(i) + " lies outside the image");
    out.provenance = sidecar.at("provenance").get<Provenance>();
    out.mask = BinaryMask::Zero(h, w);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed sidecar: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

PseudoLabelStore::PseudoLabelStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path PseudoLabelStore::mask_path(const std::string& id) const {
  return dir_ / (id + ".png");
}

std::filesystem::path PseudoLabelStore::sidecar_path(const std::string& id) const {
  return dir_ / (id + ".json");
}

std::mutex& PseudoLabelStore::lock_for(const std::string& id) const {
  std::lock_guard<std::mutex> g(table_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void PseudoLabelStore::save(const PseudoLabel& label) {
  if (label.image_id.empty() || label.image_id.find('/') != std::string::npos)
    throw InvalidArgument("invalid image id '" + label.image_id + "'");
  const std::vector<std::uint8_t> png = encode_mask_png(label.mask);
  const std::string sidecar = pseudolabel_sidecar(label).dump(2) + "\n";
  std::lock_guard<std::mutex> g(lock_for(label.image_id));
  write_file_atomic(mask_path(label.image_id), std::string(png.begin(), png.end()));
  write_file_atomic(sidecar_path(label.image_id), sidecar);
}

PseudoLabel PseudoLabelStore::load(const std::string& id) const {
  std::lock_guard<std::mutex> g(lock_for(id));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(sidecar_path(id)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(sidecar_path(id).string() + ": " + e.what());
  }
  PseudoLabel out = parse_pseudolabel_sidecar(j);
  const auto w = out.mask.cols(), h = out.mask.rows();
  out.mask = read_mask_png(mask_path(id));
  if (out.mask.cols() != w || out.mask.rows() != h)
    throw ParseError(mask_path(id).string() + ": mask size disagrees with the sidecar");
  return out;
}

bool PseudoLabelStore::contains(const std::string& id) const {
  return std::filesystem::exists(sidecar_path(id)) && std::filesystem::exists(mask_path(id));
}

std::vector<std::string> PseudoLabelStore::ids() const {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir_))
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

BatchResult pseudolabel_batch(const std::vector<ImageSample>& images,
                              const std::map<std::string, WeakAnnotation>& annotations,
                              const Segmenter& model, const PseudoLabelConfig& config,
                              PseudoLabelStore* store, int workers) {
  const std::size_t n = images.size();
  std::vector<std::optional<PseudoLabel>> labels(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& img = images[i];
      try {
        auto it = annotations.find(img.image_id);
        if (it == annotations.end()) throw ConfigError("missing weak annotation");
        PseudoLabel label = generate_pseudo_mask(img.pixels, it->second, model, config);
        label.image_id = img.image_id;
        if (store) store->save(label);
        labels[i] = std::move(label);
      } catch (const std::exception& e) {
        errors[i] = e.what();
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
  BatchResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) out.labels.push_back(std::move(*labels[i]));
    else out.errors.push_back({images[i].image_id, errors[i]});
  }
  return out;
}

}  // namespace promptseg
