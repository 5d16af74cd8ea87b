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

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace viewalign {

struct Keypoint3d {
  int id = 0;
  std::string name;
  std::array<double, 3> position{};
};

/// The single annotated reference model of an object class: sparse 3D
/// keypoints, skeleton edges in a fixed order, and a part id per keypoint.
///
/// Construction validates that ids are unique, edges reference existing
/// keypoints, every keypoint has a part label, and at least four keypoints
/// are not coplanar.
class TemplateModel {
 public:
  TemplateModel(std::string class_name, std::vector<Keypoint3d> keypoints,
                std::vector<std::pair<int, int>> edges, std::map<int, int> part_labels,
                std::map<int, std::string> part_names = {});

  const std::string& class_name() const { return class_name_; }
  const std::vector<Keypoint3d>& keypoints() const { return keypoints_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::map<int, int>& part_labels() const { return part_labels_; }
  const std::map<int, std::string>& part_names() const { return part_names_; }

  std::size_t size() const { return keypoints_.size(); }
  bool contains(int id) const;
  /// Position of keypoint id in keypoints(). Throws std::out_of_range.
  std::size_t index_of(int id) const;
  const Keypoint3d& keypoint(int id) const { return keypoints_[index_of(id)]; }
  int part_of(int id) const { return part_labels_.at(id); }
  int id_by_name(const std::string& name) const;

  /// Largest distance of a keypoint from the model origin.
  double radius() const;

 private:
  std::string class_name_;
  std::vector<Keypoint3d> keypoints_;
  std::vector<std::pair<int, int>> edges_;
  std::map<int, int> part_labels_;
  std::map<int, std::string> part_names_;
};

// Template files are JSON documents:
//
//   {
//     "format": "viewalign-template", "version": 1,
//     "class_name": "chair",
//     "keypoints": [ {"id": 0, "name": "foot_front_left", "xyz": [x, y, z], "part": 2}, ... ],
//     "edges": [ [4, 0], ... ],
//     "part_names": { "0": "seat", ... }          (optional)
//   }
TemplateModel load_template(const std::filesystem::path& path);
TemplateModel parse_template(const std::string& text);
std::string serialize_template(const TemplateModel& model);

/// 2D keypoint annotation of one image, same versioned JSON family:
///   {"format": "viewalign-keypoints2d", "version": 1,
///    "keypoints": [ {"id": 0, "uv": [u, v]}, ... ]}
std::map<int, std::array<double, 2>> parse_keypoints_2d(const std::string& text);
std::map<int, std::array<double, 2>> load_keypoints_2d(const std::filesystem::path& path);
std::string serialize_keypoints_2d(const std::map<int, std::array<double, 2>>& keypoints);

}  // namespace viewalign
