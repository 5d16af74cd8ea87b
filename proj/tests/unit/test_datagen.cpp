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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "viewalign/datagen.hpp"

using namespace viewalign;

namespace {

const std::filesystem::path kData = VIEWALIGN_DATA_DIR;

TemplateModel chair() { return load_template(kData / "templates/chair.json"); }
LegOcclusionTable chair_table() { return load_occlusion_table(kData / "templates/chair_pruning.json"); }

const std::vector<std::pair<int, int>> kSquareEdges{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 0}};

Keypoints2d square() { return {{0, {10, 10}}, {1, {20, 10}}, {2, {20, 20}}, {3, {10, 20}}, {4, {15, 15}}}; }

// Keypoint 1 sits right behind 0 and keypoint 4 right behind 2 when seen head-on.
TemplateModel occluding_model() {
  std::vector<Keypoint3d> kps{{0, "front", {0, 0, 0.5}},  {1, "back", {0, 0, -0.5}},
                              {2, "right", {0.8, 0.3, 0}}, {3, "left", {-0.8, 0.3, 0.2}},
                              {4, "behind_right", {0.8, 0.3, -0.6}}};
  std::map<int, int> parts{{0, 0}, {1, 0}, {2, 1}, {3, 1}, {4, 1}};
  return TemplateModel("occluder", kps, {{2, 1}, {1, 4}, {2, 3}}, parts);
}

std::vector<int> indices(const Polyline& line) {
  std::vector<int> out;
  for (const auto& s : line.samples) out.push_back(s.index);
  return out;
}

SkeletalFrame chair_frame(const Viewpoint& v, int samples = 8) {
  const TemplateModel m = chair();
  const Render r = render(m, v);
  return prune_visibility(skeletal_frame(keypoints_of(r), m.edges(), samples), r);
}

}  // namespace

TEST(SkeletalFrame, Examples) {
  const std::vector<std::pair<int, int>> edge{{0, 1}};
  const Keypoints2d kps{{0, {0, 0}}, {1, {10, 0}}};
  const SkeletalFrame three = skeletal_frame(kps, edge, 3);
  ASSERT_EQ(three.polylines.size(), 1u);
  const auto& s = three.polylines[0].samples;
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].uv, (Point2{0, 0}));
  EXPECT_EQ(s[1].uv, (Point2{5, 0}));
  EXPECT_EQ(s[2].uv, (Point2{10, 0}));
  const SkeletalFrame two = skeletal_frame(kps, edge, 2);
  EXPECT_EQ(two.polylines[0].samples[0].uv, (Point2{0, 0}));
  EXPECT_EQ(two.polylines[0].samples[1].uv, (Point2{10, 0}));
  EXPECT_THROW(skeletal_frame(kps, edge, 1), std::invalid_argument);
}

TEST(SkeletalFrame, FollowsEdgeOrderWithEqualSpacing) {
  const SkeletalFrame f = skeletal_frame(square(), kSquareEdges, 6);
  EXPECT_EQ(f.point_count(), kSquareEdges.size() * 6);
  for (std::size_t e = 0; e < f.polylines.size(); ++e) {
    const Polyline& line = f.polylines[e];
    EXPECT_EQ(line.edge_index, e);
    EXPECT_EQ(line.from_id, kSquareEdges[e].first);
    EXPECT_EQ(line.to_id, kSquareEdges[e].second);
    for (std::size_t i = 1; i < line.samples.size(); ++i) {
      const Point2& p = line.samples[i - 1].uv;
      const Point2& q = line.samples[i].uv;
      const Point2& a = line.samples.front().uv;
      const Point2& b = line.samples.back().uv;
      EXPECT_NEAR(std::hypot(q.u - p.u, q.v - p.v), std::hypot(b.u - a.u, b.v - a.v) / 5.0, 1e-12);
    }
  }
}

TEST(SkeletalFrame, MissingEndpointOmitsEdge) {
  Keypoints2d kps = square();
  kps.erase(4);
  const SkeletalFrame f = skeletal_frame(kps, kSquareEdges, 4);
  EXPECT_EQ(f.polylines.size(), 4u);
  EXPECT_EQ(f.log.omitted_edges, 1u);
  EXPECT_EQ(f.point_count(), 16u);
}

TEST(PruneVisibility, AllVisibleIsIdentity) {
  const TemplateModel m = chair();
  // A view where no keypoint hides another.
  for (int a = 0; a < 360; a += 5) {
    const Render r = render(m, Viewpoint(a, 25, 0));
    if (r.visible_ids().size() != m.size()) continue;
    const SkeletalFrame f = skeletal_frame(keypoints_of(r), m.edges(), 8);
    const SkeletalFrame p = prune_visibility(f, r);
    EXPECT_EQ(p.point_count(), f.point_count());
    EXPECT_EQ(p.log.visibility, 0u);
    return;
  }
  FAIL() << "no fully visible view found";
}

TEST(PruneVisibility, HiddenAndHalfHiddenEdges) {
  const TemplateModel m = occluding_model();
  const Render r = render(m, Viewpoint(0, 0, 0));
  ASSERT_TRUE(r.visible(2));
  ASSERT_FALSE(r.visible(1));
  ASSERT_FALSE(r.visible(4));
  const SkeletalFrame f = skeletal_frame(keypoints_of(r), m.edges(), 8);
  const SkeletalFrame p = prune_visibility(f, r);
  // Edge (2, 1): only the half next to keypoint 2 survives.
  EXPECT_EQ(indices(p.polylines[0]), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(p.polylines[1].samples.empty());
  EXPECT_EQ(p.polylines[2].samples.size(), 8u);
  EXPECT_EQ(p.log.visibility, 12u);
  // The mirrored edge (1, 2) keeps the far half.
  const std::vector<std::pair<int, int>> reversed{{1, 2}};
  const SkeletalFrame q = prune_visibility(skeletal_frame(keypoints_of(r), reversed, 8), r);
  EXPECT_EQ(indices(q.polylines[0]), (std::vector<int>{4, 5, 6, 7}));
}

TEST(SeatPolygon, ConvexHullCounterClockwise) {
  const std::vector<int> ids{0, 1, 2, 3, 4};
  const auto hull = seat_polygon(square(), ids);
  ASSERT_EQ(hull.size(), 4u);
  double area2 = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    area2 += a.u * b.v - b.u * a.v;
  }
  EXPECT_DOUBLE_EQ(std::abs(area2) / 2.0, 100.0);
  EXPECT_EQ(seat_polygon(square(), std::vector<int>{0, 1}).size(), 2u);
}

TEST(StrictlyInside, InteriorBoundaryExterior) {
  const std::vector<Point2> poly{{10, 10}, {20, 10}, {20, 20}, {10, 20}};
  EXPECT_TRUE(strictly_inside(poly, {15, 15}));
  EXPECT_FALSE(strictly_inside(poly, {10, 15}));
  EXPECT_FALSE(strictly_inside(poly, {20, 20}));
  EXPECT_FALSE(strictly_inside(poly, {15, 10}));
  EXPECT_FALSE(strictly_inside(poly, {25, 15}));
  EXPECT_FALSE(strictly_inside(std::vector<Point2>{{0, 0}, {1, 1}}, {0.5, 0.5}));
}

TEST(PruneSeat, Examples) {
  const SkeletalFrame f = skeletal_frame(square(), kSquareEdges, 3);
  const std::set<int> legs{4};
  EXPECT_EQ(prune_seat(f, {}, legs).point_count(), f.point_count());
  const std::vector<Point2> poly{{10, 10}, {20, 10}, {20, 20}, {10, 20}};
  const SkeletalFrame p = prune_seat(f, poly, legs);
  // Leg edge (4, 0): the centroid sample and the midpoint are inside; the
  // endpoint on the corner is on the boundary and stays.
  EXPECT_EQ(indices(p.polylines[4]), (std::vector<int>{2}));
  EXPECT_EQ(p.log.seat, 2u);
  // Seat edges on the boundary are not leg edges and stay anyway.
  for (int e = 0; e < 4; ++e) EXPECT_EQ(p.polylines[static_cast<std::size_t>(e)].samples.size(), 3u);
}

TEST(PoseQuadrant, ImageUpIsPositive) {
  EXPECT_EQ(pose_quadrant({1, 0}), 0);
  EXPECT_EQ(pose_quadrant({1, -1}), 0);
  EXPECT_EQ(pose_quadrant({0, -1}), 1);
  EXPECT_EQ(pose_quadrant({-1, 0}), 2);
  EXPECT_EQ(pose_quadrant({0, 1}), 3);
  EXPECT_EQ(pose_quadrant({1, 0.001}), 3);
  EXPECT_EQ(pose_quadrant({0, 0}), std::nullopt);
}

TEST(OrientationVector, FrontMinusBack) {
  LegOcclusionTable t;
  t.back_ids = {2, 3};
  t.front_ids = {0, 1};
  const auto o = orientation_vector(square(), t);
  ASSERT_TRUE(o);
  EXPECT_EQ(*o, (Point2{0, -10}));
  t.front_ids = {0, 9};
  EXPECT_EQ(orientation_vector(square(), t), std::nullopt);
}

TEST(PruneSelfOccludedLegs, TableLookup) {
  const SkeletalFrame f = skeletal_frame(square(), kSquareEdges, 4);
  LegOcclusionTable empty;
  EXPECT_EQ(prune_self_occluded_legs(f, {0, -1}, empty).point_count(), f.point_count());

  LegOcclusionTable t;
  t.leg_ids = {4};
  t.occluded_legs[1] = {4};
  const SkeletalFrame pruned = prune_self_occluded_legs(f, {0, -1}, t);
  EXPECT_TRUE(pruned.polylines[4].samples.empty());
  EXPECT_EQ(pruned.log.self_occlusion, 4u);
  EXPECT_EQ(prune_self_occluded_legs(f, {1, 0}, t).point_count(), f.point_count());
}

TEST(PruneSelfOccludedLegs, ZeroOrientationWarns) {
  const SkeletalFrame f = skeletal_frame(square(), kSquareEdges, 4);
  const SkeletalFrame p = prune_self_occluded_legs(f, {0, 0}, chair_table());
  EXPECT_EQ(p.point_count(), f.point_count());
  ASSERT_EQ(p.log.warnings.size(), 1u);
}

TEST(PruneSelfOccludedLegs, AzimuthSweepChangesAtQuadrantBoundaries) {
  const TemplateModel m = chair();
  const LegOcclusionTable table = chair_table();
  std::set<int> seen;
  std::optional<int> prev_quadrant;
  std::set<int> prev_pruned;
  for (int a = -180; a < 180; ++a) {
    const Render r = render(m, Viewpoint(a, 20, 0));
    const Keypoints2d kps = keypoints_of(r);
    const auto o = orientation_vector(kps, table);
    ASSERT_TRUE(o);
    const auto q = pose_quadrant(*o);
    ASSERT_TRUE(q);
    seen.insert(*q);
    const SkeletalFrame f = skeletal_frame(kps, m.edges(), 8);
    const SkeletalFrame p = prune_self_occluded_legs(f, *o, table);
    std::set<int> pruned_legs;
    for (std::size_t e = 0; e < f.polylines.size(); ++e) {
      if (p.polylines[e].samples.size() < f.polylines[e].samples.size()) {
        for (int id : {f.polylines[e].from_id, f.polylines[e].to_id})
          if (table.leg_ids.contains(id)) pruned_legs.insert(id);
      }
    }
    EXPECT_EQ(pruned_legs, table.occluded_legs.at(*q)) << "azimuth " << a;
    if (prev_quadrant) {
      EXPECT_EQ(pruned_legs != prev_pruned, *q != *prev_quadrant) << "azimuth " << a;
    }
    prev_quadrant = q;
    prev_pruned = pruned_legs;
  }
  EXPECT_EQ(seen, (std::set<int>{0, 1, 2, 3}));
}

TEST(Pruning, OrderInsensitiveAndNeverAddsPoints) {
  const TemplateModel m = chair();
  const LegOcclusionTable table = chair_table();
  for (int a = -180; a < 180; a += 20) {
    const Render r = render(m, Viewpoint(a, 25, 0));
    const Keypoints2d kps = keypoints_of(r);
    const SkeletalFrame f = skeletal_frame(kps, m.edges(), 8);
    const auto poly = seat_polygon(kps, table.seat_ids);
    const Point2 o = *orientation_vector(kps, table);
    const SkeletalFrame ab = prune_self_occluded_legs(prune_seat(f, poly, table.leg_ids), o, table);
    const SkeletalFrame ba = prune_seat(prune_self_occluded_legs(f, o, table), poly, table.leg_ids);
    ASSERT_EQ(ab.polylines.size(), ba.polylines.size());
    for (std::size_t e = 0; e < ab.polylines.size(); ++e) {
      ASSERT_EQ(indices(ab.polylines[e]), indices(ba.polylines[e]));
      ASSERT_LE(ab.polylines[e].samples.size(), f.polylines[e].samples.size());
    }
    ASSERT_LE(prune_visibility(f, r).point_count(), f.point_count());
  }
}

TEST(PairFrames, IdenticalFramesGivePositivesOnly) {
  const SkeletalFrame f = chair_frame(Viewpoint(30, 20, 0));
  const CorrespondenceSet set = pair_frames(f, f, 0, 1);
  EXPECT_EQ(set.pairs.size(), f.point_count());
  EXPECT_EQ(set.provenance.positives, f.point_count());
  EXPECT_EQ(set.provenance.negatives, 0u);
  for (const auto& p : set.pairs) {
    EXPECT_EQ(p.s, 1);
    EXPECT_EQ(p.x, p.x_prime);
  }
}

TEST(PairFrames, PositiveCountMatchesBruteForceIntersection) {
  for (int a = -180; a < 180; a += 45) {
    const SkeletalFrame fa = chair_frame(Viewpoint(a, 20, 0));
    const SkeletalFrame fb = chair_frame(Viewpoint(a + 35, 10, 5));
    std::size_t common = 0;
    for (const auto& la : fa.polylines)
      for (const auto& sa : la.samples)
        for (const auto& lb : fb.polylines)
          for (const auto& sb : lb.samples) common += la.edge_index == lb.edge_index && sa.index == sb.index;
    const CorrespondenceSet set = pair_frames(fa, fb, 2, 7);
    EXPECT_EQ(set.provenance.positives, common);
    EXPECT_EQ(set.provenance.negatives, 2 * common);
    EXPECT_EQ(set.pairs.size(), 3 * common);
    EXPECT_EQ(set.provenance.removed_visibility, fa.log.visibility + fb.log.visibility);
  }
}

TEST(PairFrames, PositivesReprojectToTheSameSkeletonPoint) {
  const TemplateModel m = chair();
  const Viewpoint va(40, 20, 0), vb(70, 15, -5);
  const Render ra = render(m, va), rb = render(m, vb);
  const SkeletalFrame fa = prune_visibility(skeletal_frame(keypoints_of(ra), m.edges(), 8), ra);
  const SkeletalFrame fb = prune_visibility(skeletal_frame(keypoints_of(rb), m.edges(), 8), rb);
  const CorrespondenceSet set = pair_frames(fa, fb, 0, 0);
  ASSERT_FALSE(set.pairs.empty());
  const CameraModel cam;
  const RotationMatrix rot_a = to_rotation(va), rot_b = to_rotation(vb);
  std::size_t k = 0;
  for (const auto& line : fa.polylines) {
    const auto& p0 = m.keypoint(line.from_id).position;
    const auto& p1 = m.keypoint(line.to_id).position;
    for (const auto& s : line.samples) {
      bool in_b = false;
      for (const auto& lb : fb.polylines)
        for (const auto& sb : lb.samples) in_b |= lb.edge_index == line.edge_index && sb.index == s.index;
      if (!in_b) continue;
      const double t = line.t(s.index);
      const std::array<double, 3> x{p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]),
                                    p0[2] + t * (p1[2] - p0[2])};
      const Point2 pa = project(x, rot_a, cam), pb = project(x, rot_b, cam);
      const auto& pair = set.pairs.at(k++);
      EXPECT_LE(std::hypot(pair.x.u - pa.u, pair.x.v - pa.v), 0.5);
      EXPECT_LE(std::hypot(pair.x_prime.u - pb.u, pair.x_prime.v - pb.v), 0.5);
    }
  }
  EXPECT_EQ(k, set.pairs.size());
}

TEST(PairFrames, SeededAndReproducible) {
  const SkeletalFrame fa = chair_frame(Viewpoint(10, 20, 0));
  const SkeletalFrame fb = chair_frame(Viewpoint(40, 20, 0));
  const auto a = pair_frames(fa, fb, 3, 99);
  EXPECT_EQ(a.pairs, pair_frames(fa, fb, 3, 99).pairs);
  EXPECT_NE(a.pairs, pair_frames(fa, fb, 3, 100).pairs);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) EXPECT_EQ(a.pairs[i].s, i % 4 == 0 ? 1 : 0);
  EXPECT_THROW(pair_frames(fa, fb, -1, 0), std::invalid_argument);
}

TEST(PairFrames, NoCommonSamplesGivesDiagnostic) {
  const SkeletalFrame fa = skeletal_frame(square(), std::vector<std::pair<int, int>>{{0, 1}}, 3);
  const SkeletalFrame fb = skeletal_frame(square(), std::vector<std::pair<int, int>>{}, 3);
  const CorrespondenceSet set = pair_frames(fa, fb, 1, 0);
  EXPECT_TRUE(set.pairs.empty());
  EXPECT_FALSE(set.provenance.diagnostics.empty());
}

TEST(CorrespondenceCsv, RoundTrip) {
  const CorrespondenceSet set = pair_frames(chair_frame(Viewpoint(10, 20, 0)), chair_frame(Viewpoint(30, 20, 0)), 1, 5);
  std::stringstream ss;
  write_correspondence_csv(ss, set);
  EXPECT_EQ(read_correspondence_csv(ss), set.pairs);
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW(read_correspondence_csv(bad_header), std::invalid_argument);
  std::istringstream bad_row("xa_u,xa_v,xb_u,xb_v,s\n1,2,3\n");
  EXPECT_THROW(read_correspondence_csv(bad_row), std::invalid_argument);
}

TEST(OcclusionTable, ParsesShippedTableAndRejectsTypos) {
  const LegOcclusionTable t = chair_table();
  EXPECT_EQ(t.seat_ids.size(), 4u);
  EXPECT_EQ(t.leg_ids.size(), 4u);
  EXPECT_EQ(t.occluded_legs.size(), 4u);
  EXPECT_THROW(parse_occlusion_table(R"({"format": "viewalign-pruning", "version": 1, "seat_ids": [],
    "leg_ids": [], "back_ids": [], "front_ids": [], "quadrant_occluded_legs": {}, "extra": 1})"),
               std::invalid_argument);
  EXPECT_THROW(parse_occlusion_table(R"({"format": "viewalign-pruning", "version": 1, "seat_ids": [],
    "leg_ids": [], "back_ids": [], "front_ids": [], "quadrant_occluded_legs": {"4": []}})"),
               std::invalid_argument);
  EXPECT_THROW(parse_occlusion_table("{"), std::invalid_argument);
}

TEST(PerturbTemplate, ZeroJitterIsIdentityAndSeedsReproduce) {
  const TemplateModel m = chair();
  const TemplateModel same = perturb_template(m, {});
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(same.keypoints()[i].position, m.keypoints()[i].position);
  const TemplateModel a = perturb_template(m, {0.05, 0.1, 3});
  const TemplateModel b = perturb_template(m, {0.05, 0.1, 3});
  EXPECT_EQ(serialize_template(a), serialize_template(b));
  EXPECT_NE(serialize_template(a), serialize_template(perturb_template(m, {0.05, 0.1, 4})));
  EXPECT_EQ(a.edges(), m.edges());
  EXPECT_EQ(a.part_labels(), m.part_labels());
  EXPECT_THROW(perturb_template(m, {-0.1, 0.0, 0}), std::invalid_argument);
}
