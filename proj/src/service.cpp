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

#include "promptseg/service.hpp"

#include <chrono>
#include <mutex>
#include <regex>

#include "httplib.h"
#include "promptseg/base64.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/png_io.hpp"

namespace promptseg {

struct Service::Http {
  httplib::Server server;
};

namespace {

using nlohmann::json;

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string kind, const std::string& message, int box_index = -1)
      : std::runtime_error(message), status(status), kind(std::move(kind)), box_index(box_index) {}
  int status;
  std::string kind;
  int box_index;
};

ServiceReply json_reply(const json& j, int status = 200) {
  ServiceReply r;
  r.status = status;
  r.body = j.dump();
  return r;
}

ServiceReply error_reply(int status, const std::string& kind, const std::string& message,
                         int box_index = -1) {
  json j = {{"error", kind}, {"message", message}};
  if (box_index >= 0) j["box_index"] = box_index;
  ServiceReply r = json_reply(j, status);
  if (status == 503) {
    r.headers["Retry-After"] = "1";
    j["retry"] = true;
    r.body = j.dump();
  }
  return r;
}

json parse_body(const std::string& body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw HttpError(400, "parse_error", "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw HttpError(400, "parse_error", std::string("malformed JSON: ") + e.what());
  }
}

std::vector<Box> parse_boxes(const json& j, int width, int height, int max_boxes) {
  if (!j.is_array()) throw HttpError(400, "invalid_argument", "boxes must be an array");
  if (static_cast<int>(j.size()) > max_boxes)
    throw HttpError(413, "invalid_argument",
                    "too many boxes: " + std::to_string(j.size()) + " > " + std::to_string(max_boxes));
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Box b;
    try {
      b = j[i].get<Box>();
    } catch (const std::exception&) {
      throw HttpError(400, "invalid_argument",
                      "box " + std::to_string(i) + " must be [x0, y0, x1, y1] integers",
                      static_cast<int>(i));
    }
    if (width > 0 && !b.valid_in(width, height))
      throw HttpError(400, "invalid_argument",
                      "box " + std::to_string(i) + " lies outside the image or is inverted",
                      static_cast<int>(i));
    boxes.push_back(b);
  }
  return boxes;
}

void require_id(const std::string& id) {
  if (!valid_image_id(id)) throw HttpError(400, "invalid_argument", "invalid image id '" + id + "'");
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

Service::Service(std::shared_ptr<Workspace> workspace, ServiceConfig config)
    : workspace_(std::move(workspace)), config_(config), http_(std::make_unique<Http>()) {
  auto& svr = http_->server;
  const int workers = std::max(1, config_.workers);
  svr.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  svr.set_payload_max_length(config_.max_body_bytes);
  auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
    const ServiceReply r = handle(req.method, req.path, req.body);
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  svr.Get(R"(/.*)", bridge);
  svr.Post(R"(/.*)", bridge);
}

Service::~Service() { stop(); }

void Service::set_model(std::shared_ptr<const Segmenter> model) {
  std::unique_lock lock(model_mutex_);
  model_ = std::move(model);
}

bool Service::model_loaded() const {
  std::shared_lock lock(model_mutex_);
  return model_ != nullptr;
}

ServiceReply Service::handle(const std::string& method, const std::string& path,
                             const std::string& body) {
  static const std::regex kImage(R"(/v1/images/([^/]+))");
  static const std::regex kAnnotation(R"(/v1/annotations/([^/]+))");
  static const std::regex kPseudo(R"(/v1/pseudolabels/([^/]+))");
  static const std::regex kAccept(R"(/v1/pseudolabels/([^/]+)/accept)");
  std::smatch m;
  try {
    if (method == "GET" && path == "/v1/health") return health();
    if (method == "GET" && path == "/v1/images") return list_images();
    if (method == "POST" && path == "/v1/segment") return segment(body);
    if (method == "GET" && std::regex_match(path, m, kImage)) return get_image(m[1]);
    if (method == "GET" && std::regex_match(path, m, kAnnotation)) return get_annotation(m[1]);
    if (method == "POST" && std::regex_match(path, m, kAnnotation)) return save_annotation(m[1], body);
    if (method == "GET" && std::regex_match(path, m, kPseudo)) return get_pseudolabel(m[1]);
    if (method == "POST" && std::regex_match(path, m, kAccept)) return accept_pseudolabel(m[1], body);
    return error_reply(404, "not_found", "no route for " + method + " " + path);
  } catch (const HttpError& e) {
    return error_reply(e.status, e.kind, e.what(), e.box_index);
  } catch (const InferenceError& e) {
    return error_reply(500, e.kind(), e.what(), e.box_index());
  } catch (const InvalidArgument& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const ParseError& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const IoError& e) {
    return error_reply(503, e.kind(), std::string("storage failure: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return error_reply(503, "io_error", std::string("storage failure: ") + e.what());
  } catch (const Error& e) {
    return error_reply(500, e.kind(), e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "error", e.what());
  }
}

ServiceReply Service::health() const {
  std::shared_lock lock(model_mutex_);
  if (!model_) return json_reply({{"status", "loading"}, {"checkpoint_id", nullptr}});
  return json_reply({{"status", "ok"}, {"checkpoint_id", model_->model_id()}});
}

ServiceReply Service::list_images() const {
  json images = json::array();
  for (const auto& id : workspace_->image_ids()) {
    const auto [w, h] = workspace_->image_size(id);
    images.push_back({{"image_id", id}, {"width", w}, {"height", h}});
  }
  return json_reply({{"images", images}});
}

ServiceReply Service::get_image(const std::string& id) const {
  require_id(id);
  if (!workspace_->has_image(id)) throw HttpError(404, "not_found", "unknown image '" + id + "'");
  ServiceReply r;
  r.content_type = "image/png";
  r.body = read_file(workspace_->image_path(id));
  return r;
}

ServiceReply Service::segment(const std::string& body) {
  const auto t0 = std::chrono::steady_clock::now();
  const json req = parse_body(body);
  RgbImage image;
  std::string image_id;
  if (req.contains("image_id")) {
    image_id = req["image_id"].get<std::string>();
    require_id(image_id);
    if (!workspace_->has_image(image_id))
      throw HttpError(404, "not_found", "unknown image '" + image_id + "'");
    image = workspace_->load_image(image_id);
  } else if (req.contains("image_png_base64")) {
    try {
      image = decode_rgb_png(base64_decode(req["image_png_base64"].get<std::string>()));
    } catch (const std::exception& e) {
      throw HttpError(400, "invalid_argument", std::string("cannot decode inline image: ") + e.what());
    }
  } else {
    throw HttpError(400, "invalid_argument", "request needs image_id or image_png_base64");
  }
  const std::vector<Box> boxes =
      parse_boxes(req.value("boxes", json::array()), image.width, image.height, config_.max_boxes);
  const json options = req.value("options", json::object());
  PseudoLabelConfig plc = config_.pseudolabel;
  plc.threshold = options.value("threshold", plc.threshold);
  if (!(plc.threshold > 0 && plc.threshold < 1))
    throw HttpError(400, "invalid_argument", "threshold must lie in (0, 1)");
  const bool confidences = options.value("return_confidences", true);
  const double decode_ms = elapsed_ms(t0);

  std::shared_lock lock(model_mutex_);
  if (!model_) throw HttpError(503, "model_not_loaded", "model is still loading");
  const auto t1 = std::chrono::steady_clock::now();
  const PseudoLabel label = generate_pseudo_mask(image, WeakAnnotation{image_id, boxes}, *model_, plc);
  const double infer_ms = elapsed_ms(t1);

  json resp = {{"image_id", image_id.empty() ? json(nullptr) : json(image_id)},
               {"width", image.width},
               {"height", image.height},
               {"mask_png_base64", base64_encode(encode_mask_png(label.mask))},
               {"checkpoint_id", model_->model_id()},
               {"timing_ms", {{"decode", decode_ms}, {"inference", infer_ms}, {"total", elapsed_ms(t0)}}}};
  if (confidences) resp["per_box_confidence"] = label.per_box_confidence;
  return json_reply(resp);
}

ServiceReply Service::get_annotation(const std::string& id) const {
  require_id(id);
  if (!workspace_->has_weak(id)) throw HttpError(404, "not_found", "no annotation for '" + id + "'");
  return json_reply(workspace_->load_weak(id));
}

ServiceReply Service::save_annotation(const std::string& id, const std::string& body) {
  require_id(id);
  if (!workspace_->has_image(id)) throw HttpError(404, "not_found", "unknown image '" + id + "'");
  const json req = parse_body(body);
  const auto [w, h] = workspace_->image_size(id);
  WeakAnnotation ann{id, parse_boxes(req.value("boxes", json::array()), w, h, config_.max_boxes)};
  workspace_->save_weak(ann);
  return json_reply(ann);
}

ServiceReply Service::get_pseudolabel(const std::string& id) const {
  require_id(id);
  const auto& store = workspace_->pseudolabels();
  if (!store.contains(id)) throw HttpError(404, "not_found", "no pseudo-label for '" + id + "'");
  const PseudoLabel label = store.load(id);
  json j = pseudolabel_sidecar(label);
  j["mask_png_base64"] = base64_encode(encode_mask_png(label.mask));
  return json_reply(j);
}

ServiceReply Service::accept_pseudolabel(const std::string& id, const std::string& body) {
  require_id(id);
  if (!workspace_->has_image(id)) throw HttpError(404, "not_found", "unknown image '" + id + "'");
  json req = parse_body(body);
  if (!req.contains("mask_png_base64"))
    throw HttpError(400, "invalid_argument", "request needs mask_png_base64");
  BinaryMask mask;
  try {
    mask = decode_mask_png(base64_decode(req["mask_png_base64"].get<std::string>()));
  } catch (const std::exception& e) {
    throw HttpError(400, "invalid_argument", std::string("cannot decode mask: ") + e.what());
  }
  const auto [w, h] = workspace_->image_size(id);
  if (mask.cols() != w || mask.rows() != h)
    throw HttpError(400, "invalid_argument", "mask size does not match the image");
  parse_boxes(req.value("boxes", json::array()), w, h, config_.max_boxes);

  json sidecar = req;
  sidecar.erase("mask_png_base64");
  sidecar["schema"] = "promptseg.pseudolabel/1";
  sidecar["image_id"] = id;
  sidecar["width"] = w;
  sidecar["height"] = h;
  if (!sidecar.contains("boxes")) sidecar["boxes"] = json::array();
  if (!sidecar.contains("per_box_confidence"))
    sidecar["per_box_confidence"] = std::vector<double>(sidecar["boxes"].size(), 1.0);
  if (!sidecar.contains("provenance")) {
    std::shared_lock lock(model_mutex_);
    sidecar["provenance"] = Provenance{model_ ? model_->model_id() : "manual",
                                       config_.pseudolabel.threshold,
                                       config_.pseudolabel.expand_ratio, "max_quality",
                                       "accepted"};
  }
  PseudoLabel label = parse_pseudolabel_sidecar(sidecar);
  label.mask = std::move(mask);
  workspace_->pseudolabels().save(label);
  return json_reply(pseudolabel_sidecar(label));
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) return http_->server.bind_to_any_port(host);
  return http_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::run() { return http_->server.listen_after_bind(); }

void Service::stop() {
  if (http_ && http_->server.is_running()) http_->server.stop();
}

}  // namespace promptseg
