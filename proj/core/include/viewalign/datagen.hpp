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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "viewalign/correspondence.hpp"
#include "viewalign/renderer.hpp"
#include "viewalign/template_model.hpp"

namespace viewalign {

struct EdgeSample {
  int index = 0;  // position along the edge, 0 at the edge's first keypoint
  Point2 uv;
};

struct Polyline {
  std::size_t edge_index = 0;
  int from_id = 0;
  int to_id = 0;
  int sample_count = 0;  // samples before pruning
  std::vector<EdgeSample> samples;

  /// Fraction along the edge of sample `index`, in [0, 1].
  double t(int index) const { return sample_count > 1 ? double(index) / (sample_count - 1) : 0.0; }
};

/// Points removed per rule; carried by frames and summed into pair provenance.
struct PruneLog {
  std::size_t omitted_edges = 0;
  std::size_t visibility = 0;
  std::size_t seat = 0;
  std::size_t self_occlusion = 0;
  std::vector<std::string> warnings;
};

/// Dense polyline sampling of the skeleton in one image. Polylines follow
/// the model's edge order; pruning only removes samples.
struct SkeletalFrame {
  std::vector<Polyline> polylines;
  PruneLog log;

  std::size_t point_count() const;
};

using Keypoints2d = std::map<int, Point2>;

/// Samples every edge endpoint-to-endpoint inclusive. Edges with a missing
/// endpoint are left out and counted in log.omitted_edges.
SkeletalFrame skeletal_frame(const Keypoints2d& keypoints,
                             std::span<const std::pair<int, int>> edges, int samples_per_edge = 8);

/// Drops samples of edges with both endpoints hidden in r. On an edge with
/// one hidden endpoint, keeps the samples within `split` of the visible end.
SkeletalFrame prune_visibility(const SkeletalFrame& frame, const Render& r, double split = 0.5);

/// Convex hull (counter-clockwise in image coordinates) of the given keypoints.
std::vector<Point2> seat_polygon(const Keypoints2d& keypoints, std::span<const int> seat_ids);

/// Strict interior test; points on the boundary are outside.
bool strictly_inside(std::span<const Point2> polygon, const Point2& p);

/// Drops samples of leg edges (edges touching a leg keypoint) that lie
/// strictly inside the seat polygon. Polygons with fewer than 3 vertices
/// prune nothing.
SkeletalFrame prune_seat(const SkeletalFrame& frame, std::span<const Point2> polygon,
                         const std::set<int>& leg_ids);

/// Heuristic self-occlusion table, shipped as data. The quadrant of the
/// seat's back-to-front image vector selects which legs are hidden.
struct LegOcclusionTable {
  std::vector<int> seat_ids;
  std::set<int> leg_ids;
  std::vector<int> back_ids;
  std::vector<int> front_ids;
  /// Quadrant (0..3, counter-clockwise from image right with image up
  /// positive) -> leg keypoints whose edges are hidden.
  std::map<int, std::set<int>> occluded_legs;
};

LegOcclusionTable load_occlusion_table(const std::filesystem::path& path);
LegOcclusionTable parse_occlusion_table(const std::string& text);

/// Mean front keypoint minus mean back keypoint, in pixels. nullopt when a
/// required keypoint is missing.
std::optional<Point2> orientation_vector(const Keypoints2d& keypoints, const LegOcclusionTable& table);

/// Quadrant of an image vector, or nullopt for a zero-length vector.
std::optional<int> pose_quadrant(const Point2& orientation);

/// Drops samples on the legs the table marks as hidden for the quadrant of
/// `orientation`. A zero-length orientation prunes nothing and records a warning.
SkeletalFrame prune_self_occluded_legs(const SkeletalFrame& frame, const Point2& orientation,
                                       const LegOcclusionTable& table);

struct PairingProvenance {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t omitted_edges = 0;
  std::size_t removed_visibility = 0;
  std::size_t removed_seat = 0;
  std::size_t removed_self_occlusion = 0;
  std::vector<std::string> diagnostics;
};

struct CorrespondenceSet {
  std::vector<CorrespondencePair> pairs;
  PairingProvenance provenance;
};

/// Positives link surviving samples with the same edge and sample index;
/// each positive is followed by `negatives_per_positive` seeded uniform
/// draws of non-corresponding sample pairs.
CorrespondenceSet pair_frames(const SkeletalFrame& a, const SkeletalFrame& b,
                              int negatives_per_positive = 1, std::uint64_t seed = 0);

/// CSV: xa_u,xa_v,xb_u,xb_v,s
void write_correspondence_csv(std::ostream& os, const CorrespondenceSet& set);
std::vector<CorrespondencePair> read_correspondence_csv(std::istream& is);

/// Shape perturbation used to synthesize "real" instances of a class.
struct PerturbationSpec {
  double keypoint_jitter = 0.0;  // stddev of per-keypoint 3D offsets, model units
  double scale_jitter = 0.0;     // stddev of the global log-scale
  std::uint64_t seed = 0;
};

/// A clone of the template with jittered keypoints. The result keeps ids,
/// edges, and part labels, so ground-truth correspondences carry over.
TemplateModel perturb_template(const TemplateModel& model, const PerturbationSpec& cfg);

Keypoints2d keypoints_of(const Render& r);

}  // namespace viewalign
