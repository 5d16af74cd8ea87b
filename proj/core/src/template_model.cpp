// Copyright 2026 The viewalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "viewalign/template_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace viewalign {
namespace {

using json = nlohmann::json;

constexpr const char* kTemplateFormat = "viewalign-template";
constexpr const char* kKeypointsFormat = "viewalign-keypoints2d";
constexpr int kFormatVersion = 1;

std::array<double, 3> sub(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

bool has_non_coplanar_quad(const std::vector<Keypoint3d>& kps) {
  const std::size_t n = kps.size();
  double scale = 0.0;
  for (const auto& k : kps) scale = std::max(scale, std::sqrt(dot(k.position, k.position)));
  const double eps = 1e-9 * std::max(1.0, scale * scale * scale);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto ab = sub(kps[b].position, kps[a].position);
      for (std::size_t c = b + 1; c < n; ++c) {
        const auto normal = cross(ab, sub(kps[c].position, kps[a].position));
        for (std::size_t d = c + 1; d < n; ++d) {
          if (std::abs(dot(normal, sub(kps[d].position, kps[a].position))) > eps) return true;
        }
      }
    }
  }
  return false;
}

void expect_format(const json& doc, const char* format) {
  if (!doc.is_object()) throw std::invalid_argument("expected a JSON object");
  if (doc.value("format", std::string{}) != format) {
    throw std::invalid_argument(std::string("expected \"format\": \"") + format + "\"");
  }
  if (doc.value("version", -1) != kFormatVersion) {
    throw std::invalid_argument("unsupported format version");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TemplateModel::TemplateModel(std::string class_name, std::vector<Keypoint3d> keypoints,
                             std::vector<std::pair<int, int>> edges,
                             std::map<int, int> part_labels, std::map<int, std::string> part_names)
    : class_name_(std::move(class_name)),
      keypoints_(std::move(keypoints)),
      edges_(std::move(edges)),
      part_labels_(std::move(part_labels)),
      part_names_(std::move(part_names)) {
  std::set<int> ids;
  for (const auto& k : keypoints_) {
    if (!ids.insert(k.id).second) {
      throw std::invalid_argument("TemplateModel: duplicate keypoint id " + std::to_string(k.id));
    }
    for (double x : k.position) {
      if (!std::isfinite(x)) throw std::invalid_argument("TemplateModel: non-finite position");
    }
    if (!part_labels_.contains(k.id)) {
      throw std::invalid_argument("TemplateModel: keypoint " + std::to_string(k.id) +
                                  " has no part label");
    }
  }
  for (const auto& [a, b] : edges_) {
    if (!ids.contains(a) || !ids.contains(b) || a == b) {
      throw std::invalid_argument("TemplateModel: edge (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ") references an unknown keypoint");
    }
  }
  for (const auto& [id, part] : part_labels_) {
    if (!ids.contains(id)) {
      throw std::invalid_argument("TemplateModel: part label for unknown keypoint " +
                                  std::to_string(id));
    }
  }
  if (keypoints_.size() < 4 || !has_non_coplanar_quad(keypoints_)) {
    throw std::invalid_argument("TemplateModel: need at least 4 non-coplanar keypoints");
  }
}

bool TemplateModel::contains(int id) const {
  return std::any_of(keypoints_.begin(), keypoints_.end(),
                     [id](const Keypoint3d& k) { return k.id == id; });
}

std::size_t TemplateModel::index_of(int id) const {
  for (std::size_t i = 0; i < keypoints_.size(); ++i) {
    if (keypoints_[i].id == id) return i;
  }
  throw std::out_of_range("TemplateModel: unknown keypoint id " + std::to_string(id));
}

int TemplateModel::id_by_name(const std::string& name) const {
  for (const auto& k : keypoints_) {
    if (k.name == name) return k.id;
  }
  throw std::out_of_range("TemplateModel: unknown keypoint name " + name);
}

double TemplateModel::radius() const {
  double r = 0.0;
  for (const auto& k : keypoints_) r = std::max(r, std::sqrt(dot(k.position, k.position)));
  return r;
}

namespace {

TemplateModel parse_template_doc(const std::string& text) {
  const json doc = json::parse(text);
  expect_format(doc, kTemplateFormat);
  static const std::set<std::string> kKeys{"format", "version", "class_name",
                                           "keypoints", "edges", "part_names"};
  for (const auto& [key, _] : doc.items()) {
    if (!kKeys.contains(key)) throw std::invalid_argument("template: unknown key \"" + key + "\"");
  }
  std::vector<Keypoint3d> keypoints;
  std::map<int, int> parts;
  for (const auto& k : doc.at("keypoints")) {
    Keypoint3d kp;
    kp.id = k.at("id").get<int>();
    kp.name = k.value("name", std::string{});
    kp.position = k.at("xyz").get<std::array<double, 3>>();
    parts[kp.id] = k.at("part").get<int>();
    keypoints.push_back(std::move(kp));
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : doc.at("edges")) {
    const auto pair = e.get<std::array<int, 2>>();
    edges.emplace_back(pair[0], pair[1]);
  }
  std::map<int, std::string> part_names;
  if (doc.contains("part_names")) {
    for (const auto& [key, value] : doc.at("part_names").items()) {
      part_names[std::stoi(key)] = value.get<std::string>();
    }
  }
  return TemplateModel(doc.at("class_name").get<std::string>(), std::move(keypoints),
                       std::move(edges), std::move(parts), std::move(part_names));
}

std::map<int, std::array<double, 2>> parse_keypoints_doc(const std::string& text) {
  const json doc = json::parse(text);
  expect_format(doc, kKeypointsFormat);
  std::map<int, std::array<double, 2>> out;
  for (const auto& k : doc.at("keypoints")) {
    const int id = k.at("id").get<int>();
    if (!out.emplace(id, k.at("uv").get<std::array<double, 2>>()).second) {
      throw std::invalid_argument("keypoints2d: duplicate id " + std::to_string(id));
    }
  }
  return out;
}

}  // namespace

TemplateModel parse_template(const std::string& text) {
  try {
    return parse_template_doc(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("template: ") + e.what());
  }
}

TemplateModel load_template(const std::filesystem::path& path) {
  try {
    return parse_template(read_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string serialize_template(const TemplateModel& model) {
  json doc;
  doc["format"] = kTemplateFormat;
  doc["version"] = kFormatVersion;
  doc["class_name"] = model.class_name();
  json kps = json::array();
  for (const auto& k : model.keypoints()) {
    kps.push_back({{"id", k.id}, {"name", k.name}, {"xyz", k.position},
                   {"part", model.part_of(k.id)}});
  }
  doc["keypoints"] = std::move(kps);
  json edges = json::array();
  for (const auto& [a, b] : model.edges()) edges.push_back({a, b});
  doc["edges"] = std::move(edges);
  if (!model.part_names().empty()) {
    json names = json::object();
    for (const auto& [id, name] : model.part_names()) names[std::to_string(id)] = name;
    doc["part_names"] = std::move(names);
  }
  return doc.dump(2) + "\n";
}

std::map<int, std::array<double, 2>> parse_keypoints_2d(const std::string& text) {
  try {
    return parse_keypoints_doc(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("keypoints2d: ") + e.what());
  }
}

std::map<int, std::array<double, 2>> load_keypoints_2d(const std::filesystem::path& path) {
  try {
    return parse_keypoints_2d(read_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string serialize_keypoints_2d(const std::map<int, std::array<double, 2>>& keypoints) {
  json doc;
  doc["format"] = kKeypointsFormat;
  doc["version"] = kFormatVersion;
  json kps = json::array();
  for (const auto& [id, uv] : keypoints) kps.push_back({{"id", id}, {"uv", uv}});
  doc["keypoints"] = std::move(kps);
  return doc.dump(2) + "\n";
}

}  // namespace viewalign
