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

#include <compare>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "viewalign/feature_map.hpp"
#include "viewalign/renderer.hpp"

namespace viewalign {

struct GridLocation {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const GridLocation&, const GridLocation&) = default;
};

/// Normalized correlation between a source and a target feature map of the
/// same h x w shape. Stored target-major: value(t, s) lives at t * N + s,
/// N = h * w, so each target location owns a contiguous slice over sources.
class CorrelationTensor {
 public:
  CorrelationTensor() = default;
  CorrelationTensor(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t locations() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  double operator()(std::size_t target, std::size_t source) const {
    return values_[target * locations() + source];
  }
  double at(GridLocation target, GridLocation source) const {
    return (*this)(flat(target), flat(source));
  }
  std::span<const double> slice(std::size_t target) const {
    return std::span<const double>(values_).subspan(target * locations(), locations());
  }
  const std::vector<double>& values() const { return values_; }

  std::size_t flat(GridLocation p) const {
    return static_cast<std::size_t>(p.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(p.col);
  }
  GridLocation location(std::size_t flat) const {
    return {static_cast<int>(flat / static_cast<std::size_t>(width_)),
            static_cast<int>(flat % static_cast<std::size_t>(width_))};
  }

  /// Every value multiplied by factor (> 0).
  CorrelationTensor scaled(double factor) const;

  friend bool operator==(const CorrelationTensor&, const CorrelationTensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// S(s, t) = max(0, <source(s), target(t)>) / sqrt(sum_k max(0, <source(k), target(t)>)^2)
///
/// Each target location is normalized over all source locations; a target
/// with no positive dot product gets an all-zero slice. Parallelized over
/// blocks of target locations; the result does not depend on `workers`.
CorrelationTensor correlate(const FeatureMap& source, const FeatureMap& target, int workers = 0);

/// Same as apply_alpha(correlate(source, target), target_mask) without
/// computing the masked-out slices.
CorrelationTensor correlate(const FeatureMap& source, const FeatureMap& target,
                            const Mask& target_mask, int workers = 0);

/// Zeroes the slices of target locations outside the mask.
CorrelationTensor apply_alpha(const CorrelationTensor& s, const Mask& alpha);

/// Fixed compaction: averages both the target and the source grid over
/// factor x factor blocks, giving an (h/f) x (w/f) x (h/f * w/f) tensor.
CorrelationTensor pool(const CorrelationTensor& s, int factor);

/// Binary layout, little-endian:
///   char[4] "VCOR", uint32 version (1), uint32 h, uint32 w,
///   float32 values[h * w * h * w] in target-major row-major order.
void write_correlation(std::ostream& os, const CorrelationTensor& s);
CorrelationTensor read_correlation(std::istream& is);

/// Pixel-space correspondence between image a (x) and image b (x_prime).
struct CorrespondencePair {
  Point2 x;
  Point2 x_prime;
  int s = 1;

  friend bool operator==(const CorrespondencePair&, const CorrespondencePair&) = default;
};

struct ContrastiveResult {
  double loss = 0.0;
  std::vector<double> grad_a;
  std::vector<double> grad_b;
};

/// (1/2N) sum_i [ s_i D_i + (1 - s_i) max(0, m - D_i) ],  D_i = |a(x_i) - b(x'_i)|^2
///
/// Descriptors are read from the feature cell containing each pixel
/// location (`stride` pixels per cell). Throws std::invalid_argument for an
/// empty pair list, non-positive margin, or an out-of-bounds location.
double contrastive_loss(const DescriptorView& a, const DescriptorView& b,
                        std::span<const CorrespondencePair> pairs, double margin, int stride = 1);

/// Loss plus its gradient with respect to every descriptor entry of a and b.
ContrastiveResult contrastive_loss_with_gradient(const DescriptorView& a, const DescriptorView& b,
                                                 std::span<const CorrespondencePair> pairs,
                                                 double margin, int stride = 1);

using MatchMap = std::map<GridLocation, GridLocation>;
using LabelMap = std::map<GridLocation, int>;

/// Best source location for every target location with a non-zero slice;
/// ties go to the first source in row-major order.
MatchMap best_matches(const CorrelationTensor& s);

/// Each matched target location takes the label of its source location;
/// targets whose source is unlabeled stay unlabeled.
LabelMap transfer_labels(const MatchMap& matches, const LabelMap& source_labels);

/// Part label of every feature cell whose dominant keypoint deposits at
/// least min_weight; cells far from every keypoint stay unlabeled.
LabelMap part_label_map(const Render& r, const TemplateModel& model, const CameraModel& camera,
                        const DescriptorSpec& cfg = {}, double min_weight = 0.5);

}  // namespace viewalign
