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

#include <cstddef>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>

#include "promptseg/pseudolabel.hpp"
#include "promptseg/workspace.hpp"

namespace promptseg {

struct ServiceConfig {
  int max_boxes = 2048;
  int workers = 4;
  std::size_t max_body_bytes = std::size_t(64) << 20;
  PseudoLabelConfig pseudolabel;
};

struct ServiceReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// HTTP front end for box-prompted segmentation and annotation storage.
///
///   POST /v1/segment                         boxes -> merged mask
///   GET  /v1/health                          {"status": "loading"|"ok"}
///   GET  /v1/images                          ids and dimensions
///   GET  /v1/images/{id}                     PNG bytes
///   GET  /v1/annotations/{id}                stored boxes
///   POST /v1/annotations/{id}                store boxes
///   GET  /v1/pseudolabels/{id}               sidecar + mask
///   POST /v1/pseudolabels/{id}/accept        store an accepted mask
///
/// Requests run on a bounded pool; a model swap waits for in-flight
/// segment requests to finish.
class Service {
 public:
  Service(std::shared_ptr<Workspace> workspace, ServiceConfig config = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void set_model(std::shared_ptr<const Segmenter> model);
  bool model_loaded() const;

  /// Transport-independent dispatch; `path` excludes the query string.
  ServiceReply handle(const std::string& method, const std::string& path, const std::string& body);

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool run();
  void stop();

 private:
  ServiceReply segment(const std::string& body);
  ServiceReply health() const;
  ServiceReply list_images() const;
  ServiceReply get_image(const std::string& id) const;
  ServiceReply get_annotation(const std::string& id) const;
  ServiceReply save_annotation(const std::string& id, const std::string& body);
  ServiceReply get_pseudolabel(const std::string& id) const;
  ServiceReply accept_pseudolabel(const std::string& id, const std::string& body);

  struct Http;
  std::shared_ptr<Workspace> workspace_;
  ServiceConfig config_;
  mutable std::shared_mutex model_mutex_;
  std::shared_ptr<const Segmenter> model_;
  std::unique_ptr<Http> http_;
};

}  // namespace promptseg
