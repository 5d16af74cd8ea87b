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

#include "viewalign/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "viewalign/feature_map.hpp"
#include "viewalign/seed.hpp"

namespace viewalign {
namespace {

int circular_distance(int a, int b, int n) {
  const int d = std::abs(a - b) % n;
  return std::min(d, n - d);
}

struct Candidate {
  double mse = std::numeric_limits<double>::infinity();
  double l1 = 0.0;
  std::array<double, 3> d{};
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.mse != b.mse) return a.mse < b.mse;
  if (a.l1 != b.l1) return a.l1 < b.l1;
  return a.d < b.d;
}

// Offsets -k*step .. k*step with k*step <= half_width.
std::vector<double> axis_values(double center, double step, double half_width) {
  const int k = static_cast<int>(std::floor(half_width / step + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * k + 1));
  for (int i = -k; i <= k; ++i) out.push_back(center + i * step);
  return out;
}

struct MatchedPoint {
  std::array<double, 3> position;
  Point2 location;
};

class Objective {
 public:
  Objective(std::span<const KeypointMatch> matches, const TemplateModel& model,
            const Viewpoint& current, const CameraModel& camera)
      : current_(current), camera_(camera) {
    points_.reserve(matches.size());
    for (const auto& m : matches) points_.push_back({model.keypoint(m.id).position, m.location});
  }

  double operator()(const std::array<double, 3>& d) const {
    const Viewpoint v = apply_delta(current_, ViewpointDelta(d[0], d[1], d[2]));
    const RotationMatrix rot = to_rotation(v);
    double sum = 0.0;
    for (const auto& p : points_) {
      const Point2 q = project(p.position, rot, camera_);
      sum += (q.u - p.location.u) * (q.u - p.location.u) + (q.v - p.location.v) * (q.v - p.location.v);
    }
    return sum / static_cast<double>(points_.size());
  }

 private:
  Viewpoint current_;
  CameraModel camera_;
  std::vector<MatchedPoint> points_;
};

Candidate search_box(const Objective& f, const std::array<std::vector<double>, 3>& values) {
  Candidate best;
  for (const double a : values[0]) {
    for (const double e : values[1]) {
      for (const double t : values[2]) {
        Candidate c{f({a, e, t}), std::abs(a) + std::abs(e) + std::abs(t), {a, e, t}};
        if (better(c, best)) best = c;
      }
    }
  }
  return best;
}

double positive_dot(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] * b[k];
  return d > 0.0 ? d : 0.0;
}

// Vertex offset of a parabola through the log scores, in [-0.5, 0.5];
// exact for Gaussian-shaped peaks.
double peak_vertex(double left, double mid, double right) {
  if (!(left > 0.0 && mid > 0.0 && right > 0.0)) return 0.0;
  left = std::log(left);
  right = std::log(right);
  mid = std::log(mid);
  const double curvature = left - 2.0 * mid + right;
  if (!(curvature < 0.0)) return 0.0;
  return std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
}

}  // namespace

int BinLogits::argmax(int axis) const {
  const auto& v = axes.at(static_cast<std::size_t>(axis));
  if (v.empty()) throw std::invalid_argument("BinLogits: empty axis");
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

ViewpointDelta decode(const BinLogits& logits, const BinningScheme& scheme) {
  std::array<double, 3> d{};
  for (int axis = 0; axis < 3; ++axis) {
    if (logits.axes[static_cast<std::size_t>(axis)].size() != static_cast<std::size_t>(scheme.n_bins())) {
      throw std::invalid_argument("decode: logits do not match the bin count");
    }
    d[static_cast<std::size_t>(axis)] = scheme.dequantize(logits.argmax(axis));
  }
  return ViewpointDelta(d[0], d[1], d[2]);
}

BinLogits peaked_logits(const ViewpointDelta& d, const BinningScheme& scheme) {
  BinLogits out;
  const int n = scheme.n_bins();
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const int k = scheme.quantize(d[axis]);
    auto& v = out.axes[axis];
    v.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = -circular_distance(i, k, n);
  }
  return out;
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kOracle: return "oracle";
    case EstimatorKind::kNoisyOracle: return "noisy-oracle";
    case EstimatorKind::kReprojection: return "reprojection";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  if (name == "oracle") return EstimatorKind::kOracle;
  if (name == "noisy-oracle") return EstimatorKind::kNoisyOracle;
  if (name == "reprojection") return EstimatorKind::kReprojection;
  throw std::invalid_argument("unknown estimator kind: " + name);
}

std::vector<KeypointMatch> keypoint_matches(const CorrelationTensor& correlation, const Render& rendered,
                                            const FeatureMap* rendered_features, const CameraModel& camera,
                                            const MatchRefinement& refinement) {
  const int stride = camera.feature_stride;
  const int h = correlation.height();
  const int w = correlation.width();
  const double sigma = std::max(refinement.sigma_cells, 1e-6);
  std::vector<KeypointMatch> out;
  for (const int id : rendered.visible_ids()) {
    const Point2 p = rendered.keypoints_2d.at(id);
    const Point2 c = pixel_to_cell(p, stride);
    const int r0 = static_cast<int>(std::lround(c.v));
    const int c0 = static_cast<int>(std::lround(c.u));

    // Render cells around the keypoint, weighted by distance to it.
    struct Cell {
      int row, col;
      std::size_t flat;
      double weight;
    };
    std::vector<Cell> patch;
    double total_weight = 0.0;
    for (int r = r0 - refinement.window; r <= r0 + refinement.window; ++r) {
      for (int col = c0 - refinement.window; col <= c0 + refinement.window; ++col) {
        if (r < 0 || r >= h || col < 0 || col >= w) continue;
        const double dist2 = (r - c.v) * (r - c.v) + (col - c.u) * (col - c.u);
        const double wgt = std::exp(-dist2 / (2.0 * sigma * sigma));
        const std::size_t flat = correlation.flat({r, col});
        total_weight += wgt;
        const auto slice = correlation.slice(flat);
        if (std::all_of(slice.begin(), slice.end(), [](double x) { return x == 0.0; })) continue;
        patch.push_back({r, col, flat, wgt});
      }
    }
    if (patch.empty()) continue;

    // Score of translating the patch by (dr, dc) cells into the target image.
    auto score = [&](int dr, int dc) {
      double sum = 0.0;
      for (const auto& cell : patch) {
        const int sr = cell.row + dr;
        const int sc = cell.col + dc;
        if (sr < 0 || sr >= h || sc < 0 || sc >= w) continue;
        sum += cell.weight * correlation(cell.flat, correlation.flat({sr, sc}));
      }
      return sum / total_weight;
    };
    double best = -1.0;
    int br = 0, bc = 0;
    for (int dr = -(h - 1); dr <= h - 1; ++dr) {
      for (int dc = -(w - 1); dc <= w - 1; ++dc) {
        const double v = score(dr, dc);
        if (v > best) {
          best = v;
          br = dr;
          bc = dc;
        }
      }
    }
    if (best < refinement.min_score) continue;

    double fr = br + peak_vertex(score(br - 1, bc), best, score(br + 1, bc));
    double fc = bc + peak_vertex(score(br, bc - 1), best, score(br, bc + 1));

    // The interpolated peak of a patch against an unshifted copy of itself
    // is not exactly zero when the keypoint sits off the cell center; that
    // offset is a bias shared by the cross match, so remove it.
    if (rendered_features) {
      std::vector<double> norm(patch.size(), 0.0);
      const std::size_t n = rendered_features->cells();
      for (std::size_t i = 0; i < patch.size(); ++i) {
        const auto fr_cell = rendered_features->cell(patch[i].flat);
        double sq = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double d = positive_dot(fr_cell, rendered_features->cell(k));
          sq += d * d;
        }
        norm[i] = std::sqrt(sq);
      }
      auto self_score = [&](int dr, int dc) {
        double sum = 0.0;
        for (std::size_t i = 0; i < patch.size(); ++i) {
          const int sr = patch[i].row + dr;
          const int sc = patch[i].col + dc;
          if (sr < 0 || sr >= h || sc < 0 || sc >= w || !(norm[i] > 0.0)) continue;
          sum += patch[i].weight *
                 positive_dot(rendered_features->cell(patch[i].flat), rendered_features->cell(sr, sc)) / norm[i];
        }
        return sum / total_weight;
      };
      const double self = self_score(0, 0);
      fr -= peak_vertex(self_score(-1, 0), self, self_score(1, 0));
      fc -= peak_vertex(self_score(0, -1), self, self_score(0, 1));
    }
    out.push_back({id, {p.u + fc * stride, p.v + fr * stride}, best});
  }
  return out;
}

double reprojection_error(std::span<const KeypointMatch> matches, const TemplateModel& model,
                          const Viewpoint& v, const CameraModel& camera) {
  if (matches.empty()) throw std::invalid_argument("reprojection_error: no matches");
  return Objective(matches, model, v, camera)({0.0, 0.0, 0.0});
}

ViewpointDelta reprojection_search(std::span<const KeypointMatch> matches, const TemplateModel& model,
                                   const Viewpoint& current_view, const CameraModel& camera,
                                   const GridSpec& grid) {
  if (matches.size() < 4) {
    throw EstimationError("reprojection_search: fewer than 4 keypoint matches");
  }
  if (!(grid.coarse_step > 0.0)) throw std::invalid_argument("GridSpec: coarse_step must be > 0");
  const Objective f(matches, model, current_view, camera);

  std::array<std::vector<double>, 3> values;
  for (std::size_t a = 0; a < 3; ++a) values[a] = axis_values(0.0, grid.coarse_step, grid.coarse_range[a]);
  Candidate best = search_box(f, values);
  for (const auto& [step, half_width] : grid.refinements) {
    if (!(step > 0.0)) throw std::invalid_argument("GridSpec: refinement step must be > 0");
    for (std::size_t a = 0; a < 3; ++a) values[a] = axis_values(best.d[a], step, half_width);
    const Candidate c = search_box(f, values);
    if (better(c, best)) best = c;
  }
  return ViewpointDelta(best.d[0], best.d[1], best.d[2]);
}

BinLogits OracleEstimator::estimate(const EstimatorInput&, const std::optional<ViewpointDelta>& truth) const {
  if (!truth) throw EstimationError("oracle estimator needs the true viewpoint difference");
  return peaked_logits(*truth, scheme_);
}

NoisyOracleEstimator::NoisyOracleEstimator(const BinningScheme& scheme, double noise)
    : scheme_(scheme), noise_(noise) {
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw std::invalid_argument("noisy oracle: noise must be finite and >= 0");
  }
}

int NoisyOracleEstimator::corrupt(int bin, double true_delta, std::uint64_t key) const {
  const int n = scheme_.n_bins();
  const double sigma = noise_ * std::abs(compand(true_delta, scheme_.mu())) * n / 2.0;
  if (sigma <= 0.0) return bin;
  std::mt19937_64 rng(key);
  std::normal_distribution<double> normal(0.0, sigma);
  const long offset = std::lround(normal(rng));
  return static_cast<int>(((bin + offset) % n + n) % n);
}

int NoisyOracleEstimator::bin_error(double true_delta, std::uint64_t key) const {
  const int k = scheme_.quantize(true_delta);
  return circular_distance(k, corrupt(k, true_delta, key), scheme_.n_bins());
}

BinLogits NoisyOracleEstimator::estimate(const EstimatorInput& input,
                                         const std::optional<ViewpointDelta>& truth) const {
  if (!truth) throw EstimationError("noisy oracle needs the true viewpoint difference");
  BinLogits out;
  const int n = scheme_.n_bins();
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const double d = (*truth)[axis];
    const int k = corrupt(scheme_.quantize(d), d, derive_seed(input.noise_key, axis));
    auto& v = out.axes[axis];
    v.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = -circular_distance(i, k, n);
  }
  return out;
}

ReprojectionEstimator::ReprojectionEstimator(const BinningScheme& scheme, ReprojectionSpec cfg)
    : scheme_(scheme), cfg_(std::move(cfg)) {
  if (cfg_.passes < 1) throw std::invalid_argument("reprojection estimator: passes must be >= 1");
}

ViewpointDelta ReprojectionEstimator::search(const EstimatorInput& input) const {
  if (!input.model || !input.camera || !input.render || !input.correlation || !input.rendered) {
    throw std::invalid_argument("reprojection estimator: missing correspondence input");
  }
  const TemplateModel& model = *input.model;
  const CameraModel& camera = *input.camera;
  auto matches = keypoint_matches(*input.correlation, *input.render, input.rendered, camera, cfg_.refinement);
  Viewpoint current = apply_delta(input.render->viewpoint,
                                  reprojection_search(matches, model, input.render->viewpoint, camera, cfg_.grid));
  if (cfg_.passes > 1 && !input.target) {
    throw std::invalid_argument("reprojection estimator: refinement passes need the target features");
  }
  const DescriptorSpec descriptors = input.descriptors ? *input.descriptors : DescriptorSpec{};
  for (int pass = 1; pass < cfg_.passes; ++pass) {
    const Render r = render(model, current, camera);
    const FeatureMap fb = descriptor_map(r, model, camera, descriptors);
    const CorrelationTensor s = correlate(*input.target, fb, r.alpha.downsample(camera.feature_stride), 1);
    matches = keypoint_matches(s, r, &fb, camera, cfg_.refinement);
    current = apply_delta(current, reprojection_search(matches, model, current, camera, cfg_.refine_grid));
  }
  return delta(input.render->viewpoint, current);
}

BinLogits ReprojectionEstimator::estimate(const EstimatorInput& input,
                                          const std::optional<ViewpointDelta>&) const {
  const ViewpointDelta d = search(input);
  BinLogits out = peaked_logits(d, scheme_);
  out.absolute_azimuth = wrap_angle(input.render->viewpoint.azimuth() + d.d_azimuth());
  return out;
}

std::unique_ptr<DifferenceEstimator> make_estimator(const EstimatorConfig& config,
                                                    const BinningScheme& scheme) {
  switch (config.kind) {
    case EstimatorKind::kOracle: return std::make_unique<OracleEstimator>(scheme);
    case EstimatorKind::kNoisyOracle: return std::make_unique<NoisyOracleEstimator>(scheme, config.noise);
    case EstimatorKind::kReprojection:
      return std::make_unique<ReprojectionEstimator>(scheme, config.reprojection);
  }
  throw std::invalid_argument("make_estimator: unknown kind");
}

double coarse_hypothesis_score(std::span<const KeypointMatch> matches, std::size_t visible,
                               const TemplateModel& model, const Viewpoint& v,
                               const CameraModel& camera, double sigma_px) {
  if (!(sigma_px > 0.0)) throw std::invalid_argument("coarse_hypothesis_score: sigma must be > 0");
  if (visible == 0) return 0.0;
  const RotationMatrix rot = to_rotation(v);
  double total = 0.0;
  for (const auto& m : matches) {
    const Point2 q = project(model.keypoint(m.id).position, rot, camera);
    const double d2 = (m.location.u - q.u) * (m.location.u - q.u) + (m.location.v - q.v) * (m.location.v - q.v);
    total += std::exp(-d2 / (2.0 * sigma_px * sigma_px));
  }
  return total / static_cast<double>(visible);
}

CoarseInitResult coarse_init(const FeatureMap& target, const TemplateModel& model,
                             const CameraModel& camera, const DescriptorSpec& descriptors,
                             const CoarseInitSpec& cfg) {
  if (cfg.hypotheses < 1) throw std::invalid_argument("coarse_init: need at least one hypothesis");
  CoarseInitResult out;
  out.scores.reserve(static_cast<std::size_t>(cfg.hypotheses));
  std::vector<Viewpoint> fitted;
  for (int i = 0; i < cfg.hypotheses; ++i) {
    const Viewpoint v(360.0 * i / cfg.hypotheses, cfg.elevation_prior, cfg.tilt_prior);
    const Render r = render(model, v, camera);
    const FeatureMap rendered = descriptor_map(r, model, camera, descriptors);
    const CorrelationTensor s =
        correlate(target, rendered, r.alpha.downsample(camera.feature_stride), 1);
    const auto matches = keypoint_matches(s, r, nullptr, camera, {0.0, 2, 1.0});
    const std::size_t visible = r.visible_ids().size();
    // Elevation, tilt and the azimuth within the hypothesis bin are nuisances.
    double best = -1.0;
    Viewpoint best_view = v;
    const double half_bin = 180.0 / cfg.hypotheses;
    for (const double da : axis_values(0.0, half_bin / 6.0, half_bin)) {
      for (const double e : axis_values(cfg.elevation_prior, cfg.nuisance_step, cfg.elevation_range)) {
        for (const double t : axis_values(cfg.tilt_prior, cfg.nuisance_step, cfg.tilt_range)) {
          const Viewpoint cand(v.azimuth() + da, e, t);
          const double score = coarse_hypothesis_score(matches, visible, model, cand, camera, cfg.sigma_px);
          if (score > best) {
            best = score;
            best_view = cand;
          }
        }
      }
    }
    out.scores.push_back(best);
    fitted.push_back(best_view);
  }
  const double top = *std::max_element(out.scores.begin(), out.scores.end());
  // Scores lie in [0, 1], so the tie tolerance is absolute.
  constexpr double kTie = 1e-9;
  for (int i = 0; i < cfg.hypotheses; ++i) {
    if (out.scores[static_cast<std::size_t>(i)] >= top - kTie) {
      out.best_scored = i;
      break;
    }
  }

  // Refine the winner's fitted pose by render-and-match passes, then report
  // the bin of the refined azimuth.
  // Without any evidence the first hypothesis is returned as is.
  Viewpoint current = fitted[static_cast<std::size_t>(out.best_scored)];
  const int passes = top > kTie ? cfg.refine_passes : 0;
  if (passes == 0) current = Viewpoint(0.0, cfg.elevation_prior, cfg.tilt_prior);
  for (int pass = 0; pass < passes; ++pass) {
    const Render r = render(model, current, camera);
    const FeatureMap rendered = descriptor_map(r, model, camera, descriptors);
    const CorrelationTensor s = correlate(target, rendered, r.alpha.downsample(camera.feature_stride), 1);
    const auto matches = keypoint_matches(s, r, &rendered, camera);
    if (matches.size() < 4) break;
    current = apply_delta(current, reprojection_search(matches, model, current, camera, cfg.refine_grid));
  }
  const double bin_width = 360.0 / cfg.hypotheses;
  const double az = current.azimuth() < 0.0 ? current.azimuth() + 360.0 : current.azimuth();
  out.hypothesis = static_cast<int>(std::lround(az / bin_width)) % cfg.hypotheses;
  out.fitted = current;
  out.viewpoint = Viewpoint(bin_width * out.hypothesis, current.elevation(), current.tilt());
  return out;
}

}  // namespace viewalign
