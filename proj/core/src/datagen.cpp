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

#include "viewalign/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace viewalign {
namespace {

using json = nlohmann::json;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u);
}

bool on_segment(const Point2& p, const Point2& a, const Point2& b) {
  const double scale = std::max({1.0, std::abs(a.u), std::abs(a.v), std::abs(b.u), std::abs(b.v)});
  if (std::abs(cross(a, b, p)) > 1e-12 * scale * scale) return false;
  return p.u >= std::min(a.u, b.u) && p.u <= std::max(a.u, b.u) && p.v >= std::min(a.v, b.v) &&
         p.v <= std::max(a.v, b.v);
}

bool is_leg_edge(const Polyline& line, const std::set<int>& leg_ids) {
  return leg_ids.contains(line.from_id) || leg_ids.contains(line.to_id);
}

template <typename Keep>
SkeletalFrame filter_samples(const SkeletalFrame& frame, std::size_t PruneLog::*counter, Keep keep) {
  SkeletalFrame out = frame;
  for (auto& line : out.polylines) {
    const auto before = line.samples.size();
    std::erase_if(line.samples, [&](const EdgeSample& s) { return !keep(line, s); });
    out.log.*counter += before - line.samples.size();
  }
  return out;
}

std::optional<Point2> mean_of(const Keypoints2d& keypoints, std::span<const int> ids) {
  if (ids.empty()) return std::nullopt;
  Point2 acc;
  for (const int id : ids) {
    const auto it = keypoints.find(id);
    if (it == keypoints.end()) return std::nullopt;
    acc.u += it->second.u;
    acc.v += it->second.v;
  }
  const auto n = static_cast<double>(ids.size());
  return Point2{acc.u / n, acc.v / n};
}

}  // namespace

std::size_t SkeletalFrame::point_count() const {
  std::size_t n = 0;
  for (const auto& line : polylines) n += line.samples.size();
  return n;
}

SkeletalFrame skeletal_frame(const Keypoints2d& keypoints, std::span<const std::pair<int, int>> edges,
                             int samples_per_edge) {
  if (samples_per_edge < 2) throw std::invalid_argument("skeletal_frame: need >= 2 samples per edge");
  SkeletalFrame frame;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [from, to] = edges[e];
    const auto a = keypoints.find(from);
    const auto b = keypoints.find(to);
    if (a == keypoints.end() || b == keypoints.end()) {
      ++frame.log.omitted_edges;
      continue;
    }
    Polyline line{e, from, to, samples_per_edge, {}};
    for (int i = 0; i < samples_per_edge; ++i) {
      const double t = line.t(i);
      line.samples.push_back({i, {a->second.u + t * (b->second.u - a->second.u),
                                  a->second.v + t * (b->second.v - a->second.v)}});
    }
    frame.polylines.push_back(std::move(line));
  }
  return frame;
}

SkeletalFrame prune_visibility(const SkeletalFrame& frame, const Render& r, double split) {
  return filter_samples(frame, &PruneLog::visibility, [&](const Polyline& line, const EdgeSample& s) {
    const bool va = r.visible(line.from_id);
    const bool vb = r.visible(line.to_id);
    if (va && vb) return true;
    if (!va && !vb) return false;
    const double t = line.t(s.index);
    return va ? t <= split : 1.0 - t <= split;
  });
}

std::vector<Point2> seat_polygon(const Keypoints2d& keypoints, std::span<const int> seat_ids) {
  std::vector<Point2> pts;
  for (const int id : seat_ids) {
    const auto it = keypoints.find(id);
    if (it != keypoints.end()) pts.push_back(it->second);
  }
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.u < b.u || (a.u == b.u && a.v < b.v);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  // Andrew's monotone chain.
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool strictly_inside(std::span<const Point2> polygon, const Point2& p) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[j];
    if (on_segment(p, a, b)) return false;
    if ((a.v > p.v) != (b.v > p.v)) {
      const double u = a.u + (p.v - a.v) * (b.u - a.u) / (b.v - a.v);
      if (p.u < u) inside = !inside;
    }
  }
  return inside;
}

SkeletalFrame prune_seat(const SkeletalFrame& frame, std::span<const Point2> polygon,
                         const std::set<int>& leg_ids) {
  return filter_samples(frame, &PruneLog::seat, [&](const Polyline& line, const EdgeSample& s) {
    return !(is_leg_edge(line, leg_ids) && strictly_inside(polygon, s.uv));
  });
}

LegOcclusionTable parse_occlusion_table(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", std::string{}) != "viewalign-pruning" || doc.value("version", -1) != 1) {
      throw std::invalid_argument("pruning table: expected format viewalign-pruning version 1");
    }
    static const std::set<std::string> kKeys{"format",   "version",   "seat_ids", "leg_ids",
                                             "back_ids", "front_ids", "quadrant_occluded_legs"};
    for (const auto& [key, _] : doc.items()) {
      if (!kKeys.contains(key)) throw std::invalid_argument("pruning table: unknown key \"" + key + "\"");
    }
    LegOcclusionTable t;
    t.seat_ids = doc.at("seat_ids").get<std::vector<int>>();
    t.leg_ids = doc.at("leg_ids").get<std::set<int>>();
    t.back_ids = doc.at("back_ids").get<std::vector<int>>();
    t.front_ids = doc.at("front_ids").get<std::vector<int>>();
    for (const auto& [key, value] : doc.at("quadrant_occluded_legs").items()) {
      const int q = std::stoi(key);
      if (q < 0 || q > 3) throw std::invalid_argument("pruning table: quadrant must be 0..3");
      t.occluded_legs[q] = value.get<std::set<int>>();
    }
    return t;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("pruning table: ") + e.what());
  }
}

LegOcclusionTable load_occlusion_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_occlusion_table(ss.str());
}

std::optional<Point2> orientation_vector(const Keypoints2d& keypoints, const LegOcclusionTable& table) {
  const auto back = mean_of(keypoints, table.back_ids);
  const auto front = mean_of(keypoints, table.front_ids);
  if (!back || !front) return std::nullopt;
  return Point2{front->u - back->u, front->v - back->v};
}

std::optional<int> pose_quadrant(const Point2& orientation) {
  if (orientation.u == 0.0 && orientation.v == 0.0) return std::nullopt;
  double angle = std::atan2(-orientation.v, orientation.u) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 360.0;
  return std::min(3, static_cast<int>(angle / 90.0));
}

SkeletalFrame prune_self_occluded_legs(const SkeletalFrame& frame, const Point2& orientation,
                                       const LegOcclusionTable& table) {
  const auto quadrant = pose_quadrant(orientation);
  if (!quadrant) {
    SkeletalFrame out = frame;
    out.log.warnings.push_back("self-occlusion pruning skipped: zero-length orientation vector");
    return out;
  }
  const auto it = table.occluded_legs.find(*quadrant);
  if (it == table.occluded_legs.end()) return frame;
  const std::set<int>& hidden = it->second;
  return filter_samples(frame, &PruneLog::self_occlusion, [&](const Polyline& line, const EdgeSample&) {
    return !is_leg_edge(line, hidden);
  });
}

CorrespondenceSet pair_frames(const SkeletalFrame& a, const SkeletalFrame& b,
                              int negatives_per_positive, std::uint64_t seed) {
  if (negatives_per_positive < 0) throw std::invalid_argument("pair_frames: negative ratio");
  CorrespondenceSet out;
  auto& prov = out.provenance;
  prov.omitted_edges = a.log.omitted_edges + b.log.omitted_edges;
  prov.removed_visibility = a.log.visibility + b.log.visibility;
  prov.removed_seat = a.log.seat + b.log.seat;
  prov.removed_self_occlusion = a.log.self_occlusion + b.log.self_occlusion;
  prov.diagnostics = a.log.warnings;
  prov.diagnostics.insert(prov.diagnostics.end(), b.log.warnings.begin(), b.log.warnings.end());

  using Key = std::pair<std::size_t, int>;  // (edge index, sample index)
  std::map<Key, Point2> in_b;
  for (const auto& line : b.polylines) {
    for (const auto& s : line.samples) in_b[{line.edge_index, s.index}] = s.uv;
  }
  std::vector<std::pair<Key, Point2>> all_a;
  std::vector<std::pair<Key, Point2>> all_b(in_b.begin(), in_b.end());
  std::vector<CorrespondencePair> positives;
  for (const auto& line : a.polylines) {
    for (const auto& s : line.samples) {
      const Key key{line.edge_index, s.index};
      all_a.emplace_back(key, s.uv);
      const auto it = in_b.find(key);
      if (it != in_b.end()) positives.push_back({s.uv, it->second, 1});
    }
  }
  if (positives.empty()) {
    prov.diagnostics.push_back("no surviving common samples");
    return out;
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_a(0, all_a.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_b(0, all_b.size() - 1);
  const bool can_draw_negative = all_a.size() > 1 || all_b.size() > 1;
  if (negatives_per_positive > 0 && !can_draw_negative) {
    prov.diagnostics.push_back("no non-corresponding pairs available for negatives");
  }
  for (const auto& pos : positives) {
    out.pairs.push_back(pos);
    ++prov.positives;
    if (!can_draw_negative) continue;
    for (int k = 0; k < negatives_per_positive; ++k) {
      for (;;) {
        const auto& [ka, ua] = all_a[pick_a(rng)];
        const auto& [kb, ub] = all_b[pick_b(rng)];
        if (ka == kb) continue;
        out.pairs.push_back({ua, ub, 0});
        ++prov.negatives;
        break;
      }
    }
  }
  return out;
}

void write_correspondence_csv(std::ostream& os, const CorrespondenceSet& set) {
  const auto precision = os.precision();
  os << "xa_u,xa_v,xb_u,xb_v,s\n" << std::setprecision(17);
  for (const auto& p : set.pairs) {
    os << p.x.u << ',' << p.x.v << ',' << p.x_prime.u << ',' << p.x_prime.v << ',' << p.s << '\n';
  }
  os.precision(precision);
}

std::vector<CorrespondencePair> read_correspondence_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "xa_u,xa_v,xb_u,xb_v,s") {
    throw std::invalid_argument("correspondence csv: bad header");
  }
  std::vector<CorrespondencePair> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    CorrespondencePair p;
    char c1, c2, c3, c4;
    if (!(row >> p.x.u >> c1 >> p.x.v >> c2 >> p.x_prime.u >> c3 >> p.x_prime.v >> c4 >> p.s) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::invalid_argument("correspondence csv: malformed row: " + line);
    }
    out.push_back(p);
  }
  return out;
}

TemplateModel perturb_template(const TemplateModel& model, const PerturbationSpec& cfg) {
  if (cfg.keypoint_jitter < 0.0 || cfg.scale_jitter < 0.0) {
    throw std::invalid_argument("perturb_template: jitter must be non-negative");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  const double scale = cfg.scale_jitter > 0.0 ? std::exp(cfg.scale_jitter * normal(rng)) : 1.0;
  std::vector<Keypoint3d> kps = model.keypoints();
  for (auto& k : kps) {
    for (auto& x : k.position) {
      x *= scale;
      if (cfg.keypoint_jitter > 0.0) x += cfg.keypoint_jitter * normal(rng);
    }
  }
  return TemplateModel(model.class_name(), std::move(kps), model.edges(), model.part_labels(),
                       model.part_names());
}

Keypoints2d keypoints_of(const Render& r) { return r.keypoints_2d; }

}  // namespace viewalign
