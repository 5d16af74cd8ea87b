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
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "viewalign/template_model.hpp"
#include "viewalign/viewpoint.hpp"

namespace viewalign {

/// Continuous image coordinates in pixels; pixel (x, y) covers [x, x+1) x [y, y+1).
struct Point2 {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Weak-perspective camera on a sphere of radius `distance` around the
/// model origin, plus the rasterization settings shared by every render.
struct CameraModel {
  int height = 64;
  int width = 64;
  double focal_px = 64.0;
  double distance = 3.0;
  /// A keypoint is hidden by any strictly nearer keypoint projected within this radius.
  double occlusion_radius_px = 3.0;
  /// Pixels within this distance of the visible skeleton are foreground.
  double alpha_dilation_px = 3.0;
  /// Feature cells are stride x stride pixel blocks.
  int feature_stride = 2;

  double scale() const { return focal_px / distance; }
  int grid_height() const { return height / feature_stride; }
  int grid_width() const { return width / feature_stride; }
};

/// Binary row-major mask.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  bool at(int row, int col) const { return data_[index(row, col)] != 0; }
  void set(int row, int col, bool value) { data_[index(row, col)] = value ? 1 : 0; }
  bool operator[](std::size_t flat) const { return data_[flat] != 0; }
  std::size_t count() const;

  /// A cell is set when any pixel in its stride x stride block is set.
  Mask downsample(int stride) const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Render {
  Viewpoint viewpoint;
  int height = 0;
  int width = 0;
  std::map<int, Point2> keypoints_2d;
  std::map<int, double> depths;
  std::map<int, bool> visibility;
  Mask alpha;

  bool visible(int id) const;
  std::vector<int> visible_ids() const;

  friend bool operator==(const Render&, const Render&) = default;
};

/// Image position of a model-frame point under rotation `rot`.
Point2 project(const std::array<double, 3>& position, const RotationMatrix& rot,
               const CameraModel& camera);

/// Projects model keypoints under `camera` for viewpoint v, prunes occluded
/// keypoints by depth, and rasterizes the alpha mask from the visible
/// skeleton. Throws std::invalid_argument when the model's bounding sphere
/// does not fit in the image.
Render render(const TemplateModel& model, const Viewpoint& v, const CameraModel& camera = {});

/// CSV dump: id,name,u,v,depth,visible
void write_keypoints_csv(std::ostream& os, const TemplateModel& model, const Render& r);

/// Keypoint motion between render(v) and render(v + shift) for keypoints
/// visible in both, plus a dense per-cell field splatted from them.
struct DisparityMap {
  ViewpointDelta shift;
  std::map<int, Point2> displacements;
  int grid_height = 0;
  int grid_width = 0;
  /// Row-major (du, dv) per feature cell, in pixels.
  std::vector<Point2> field;
};

DisparityMap stereo_disparity(const TemplateModel& model, const Viewpoint& v,
                              const CameraModel& camera = {},
                              const ViewpointDelta& shift = ViewpointDelta(10.0, 10.0, 0.0));

class FeatureMap;

enum class EmbeddingKind {
  /// Keypoint i -> basis vector i, background -> basis vector n (or the
  /// normalized all-ones vector when dimension == n).
  kOneHot,
  /// Seeded random unit vectors; any dimension >= 2.
  kRandom,
};

struct DescriptorSpec {
  /// 0 selects model.size() + 1.
  int dimension = 0;
  EmbeddingKind embedding = EmbeddingKind::kOneHot;
  double sigma_cells = 1.5;
  double background_weight = 1.0;
};

struct NoiseSpec {
  double stddev = 0.0;
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

/// Unit embedding of every keypoint (by model order) followed by the background embedding.
std::vector<std::vector<double>> semantic_embeddings(const TemplateModel& model,
                                                     const DescriptorSpec& cfg);

/// Synthetic dense descriptors on the camera's feature grid: every visible
/// keypoint deposits its embedding with Gaussian falloff (cut at 3 sigma),
/// the remaining weight goes to the background embedding, then optional
/// per-keypoint dropout and additive Gaussian noise are applied and every
/// cell is normalized.
FeatureMap descriptor_map(const Render& r, const TemplateModel& model, const CameraModel& camera,
                          const DescriptorSpec& cfg = {}, const NoiseSpec& noise = {});

/// Keypoint id whose deposit dominates each feature cell, or nullopt where no
/// keypoint deposits at least min_weight (of a peak weight of 1). Computed
/// from geometry, independent of noise.
std::vector<std::optional<int>> dominant_keypoints(const Render& r, const CameraModel& camera,
                                                   const DescriptorSpec& cfg = {},
                                                   double min_weight = 0.0);

/// Feature-cell coordinates (column, row as continuous values) of a pixel position.
Point2 pixel_to_cell(const Point2& p, int stride);
/// Pixel position of the center of feature cell (row, col).
Point2 cell_center(int row, int col, int stride);

}  // namespace viewalign
