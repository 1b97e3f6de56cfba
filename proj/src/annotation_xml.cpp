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

#include "promptseg/annotation_xml.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "promptseg/errors.hpp"

namespace promptseg {
namespace {

namespace pt = boost::property_tree;

void collect_regions(const pt::ptree& node, std::vector<Polygon>& out) {
  for (const auto& [tag, child] : node) {
    if (tag == "Region") {
      Polygon poly;
      if (auto vertices = child.get_child_optional("Vertices")) {
        for (const auto& [vtag, vertex] : *vertices) {
          if (vtag != "Vertex") continue;
          try {
            poly.vertices.push_back({vertex.get<double>("<xmlattr>.X"),
                                     vertex.get<double>("<xmlattr>.Y")});
          } catch (const pt::ptree_error& e) {
            throw ParseError(std::string("Vertex without numeric X/Y attributes: ") + e.what());
          }
        }
      }
      out.push_back(std::move(poly));
    } else if (tag != "<xmlattr>") {
      collect_regions(child, out);
    }
  }
}

}  // namespace

void rasterize_polygon(const Polygon& polygon, std::int32_t label, LabelMap& labels) {
  const auto& v = polygon.vertices;
  const std::size_t n = v.size();
  if (n < 3) return;
  double ymin = v[0][1], ymax = v[0][1];
  for (const auto& p : v) {
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const int rows = static_cast<int>(labels.rows());
  const int cols = static_cast<int>(labels.cols());
  const int r0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
  const int r1 = std::min(rows - 1, static_cast<int>(std::ceil(ymax)));
  std::vector<double> xs;
  for (int r = r0; r <= r1; ++r) {
    const double yc = r + 0.5;
    xs.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const auto& a = v[i];
      const auto& b = v[j];
      if ((a[1] > yc) != (b[1] > yc))
        xs.push_back((b[0] - a[0]) * (yc - a[1]) / (b[1] - a[1]) + a[0]);
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    // A centre is inside when an odd number of crossings lie strictly to its right.
    std::size_t right = 0;  // first crossing index with xs > xc
    const int c0 = std::max(0, static_cast<int>(std::floor(xs.front() - 0.5)));
    const int c1 = std::min(cols - 1, static_cast<int>(std::ceil(xs.back())));
    for (int c = c0; c <= c1; ++c) {
      const double xc = c + 0.5;
      while (right < xs.size() && xs[right] <= xc) ++right;
      if ((xs.size() - right) % 2 == 1) labels(r, c) = label;
    }
  }
}

std::vector<Polygon> parse_region_polygons(const std::string& document) {
  pt::ptree tree;
  std::istringstream is(document);
  try {
    pt::read_xml(is, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed annotation document: " + e.message(),
                     static_cast<int>(e.line()));
  }
  std::vector<Polygon> polygons;
  collect_regions(tree, polygons);
  return polygons;
}

InstanceMaskSet parse_annotation_xml(const std::string& document, int width, int height,
                                     const std::string& image_id,
                                     std::vector<std::string>* warnings) {
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  const std::vector<Polygon> polygons = parse_region_polygons(document);
  InstanceMaskSet out;
  out.image_id = image_id;
  out.label_map = LabelMap::Zero(height, width);
  std::int32_t next = 0;
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    if (polygons[i].vertices.size() < 3) {
      if (warnings)
        warnings->push_back("region " + std::to_string(i) + " has fewer than 3 vertices; skipped");
      continue;
    }
    rasterize_polygon(polygons[i], ++next, out.label_map);
  }
  out.instance_count = compact_labels(out.label_map);
  if (warnings && out.instance_count < next)
    warnings->push_back(std::to_string(next - out.instance_count) +
                        " region(s) fully covered by later regions or outside the image");
  return out;
}

}  // namespace promptseg
