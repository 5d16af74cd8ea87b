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
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "viewalign/correspondence.hpp"
#include "viewalign/mulaw.hpp"
#include "viewalign/renderer.hpp"
#include "viewalign/template_model.hpp"
#include "viewalign/viewpoint.hpp"

namespace viewalign {

/// Raised when an estimator cannot produce a viewpoint difference.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scores over the bins of each axis (azimuth, elevation, tilt).
struct BinLogits {
  std::array<std::vector<double>, 3> axes;
  /// Optional absolute azimuth of the target, for estimators that know it.
  std::optional<double> absolute_azimuth;

  /// First index of the maximum score on an axis.
  int argmax(int axis) const;
};

/// Per-axis dequantize(argmax).
ViewpointDelta decode(const BinLogits& logits, const BinningScheme& scheme);

/// Logits peaked at the bin holding each component of d: 0 at that bin and
/// minus the circular bin distance elsewhere.
BinLogits peaked_logits(const ViewpointDelta& d, const BinningScheme& scheme);

/// Everything an estimator may look at for one (target, render) pair. The
/// render-role image has known viewpoint `render->viewpoint`; the estimate
/// is delta(render viewpoint, target viewpoint). Correspondence fields are
/// null unless the estimator asked for them.
struct EstimatorInput {
  const TemplateModel* model = nullptr;
  const CameraModel* camera = nullptr;
  const Render* render = nullptr;
  const FeatureMap* target = nullptr;
  const FeatureMap* rendered = nullptr;
  /// correlate(target, rendered) restricted to the render's alpha mask.
  const CorrelationTensor* correlation = nullptr;
  const DisparityMap* disparity = nullptr;
  /// Descriptor settings used for `rendered`; defaults when null.
  const DescriptorSpec* descriptors = nullptr;
  /// Per-call key for estimators that draw random numbers.
  std::uint64_t noise_key = 0;
};

enum class EstimatorKind { kOracle, kNoisyOracle, kReprojection };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& name);

/// Coarse-to-fine search over viewpoint differences. The coarse level
/// spans +-coarse_range per axis at coarse_step; each refinement searches
/// +-half_width around the previous best at its step.
struct GridSpec {
  double coarse_step = 10.0;
  std::array<double, 3> coarse_range{90.0, 90.0, 90.0};
  std::vector<std::pair<double, double>> refinements{{3.0, 12.0}, {1.0, 3.0}};

  double final_step() const { return refinements.empty() ? coarse_step : refinements.back().first; }
};

/// A template keypoint located in the target image.
struct KeypointMatch {
  int id = 0;
  Point2 location;  // pixels
  double score = 0.0;
};

struct MatchRefinement {
  /// Matches whose best patch score is below this are discarded.
  double min_score = 0.05;
  /// Chebyshev radius (cells) of the render patch around each keypoint.
  int window = 2;
  /// Gaussian falloff (cells) of the patch weights.
  double sigma_cells = 1.0;
};

/// Locates every keypoint visible in the render in the target image. The
/// render patch around the keypoint is translated over the target grid; a
/// translation scores the weighted correlation between each patch cell and
/// the target cell it lands on. The best integer translation is refined
/// with a per-axis parabola through its neighbours. When the render's own
/// descriptors are given, the sub-cell offset the same interpolation finds
/// for the unshifted patch is subtracted.
std::vector<KeypointMatch> keypoint_matches(const CorrelationTensor& correlation, const Render& rendered,
                                            const FeatureMap* rendered_features, const CameraModel& camera,
                                            const MatchRefinement& refinement = {});

/// Finds the delta d minimizing the mean squared distance between the
/// template keypoints projected at current_view + d and their matched
/// locations. Ties go to the smaller |d| (L1), then lexicographically.
/// Throws EstimationError with fewer than 4 matches.
ViewpointDelta reprojection_search(std::span<const KeypointMatch> matches, const TemplateModel& model,
                                   const Viewpoint& current_view, const CameraModel& camera,
                                   const GridSpec& grid = {});

/// Mean squared reprojection error of the matches at viewpoint v.
double reprojection_error(std::span<const KeypointMatch> matches, const TemplateModel& model,
                          const Viewpoint& v, const CameraModel& camera);

/// Sub-cell keypoint locations on the feature grid are biased toward whole
/// cells, less so the closer the render is to the target. Each pass after
/// the first re-renders at the current estimate, matches again and searches
/// `refine_grid` around it.
struct ReprojectionSpec {
  GridSpec grid;
  GridSpec refine_grid{3.0, {9.0, 9.0, 9.0}, {{1.0, 2.0}}};
  MatchRefinement refinement;
  int passes = 4;
};

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kOracle;
  /// Noisy oracle: bin-error stddev is noise * |compand(delta)| * n_bins / 2.
  double noise = 0.0;
  ReprojectionSpec reprojection;
};

/// Produces bin logits for the viewpoint difference of one input pair.
/// Implementations are stateless; concurrent calls are safe.
class DifferenceEstimator {
 public:
  virtual ~DifferenceEstimator() = default;

  virtual EstimatorKind kind() const = 0;
  /// Whether align must build correlation, descriptors and disparity.
  virtual bool needs_correspondence() const = 0;
  /// `truth` is delta(render viewpoint, target viewpoint) when known.
  virtual BinLogits estimate(const EstimatorInput& input,
                             const std::optional<ViewpointDelta>& truth) const = 0;
};

class OracleEstimator final : public DifferenceEstimator {
 public:
  explicit OracleEstimator(const BinningScheme& scheme) : scheme_(scheme) {}
  EstimatorKind kind() const override { return EstimatorKind::kOracle; }
  bool needs_correspondence() const override { return false; }
  BinLogits estimate(const EstimatorInput& input,
                     const std::optional<ViewpointDelta>& truth) const override;

 private:
  BinningScheme scheme_;
};

/// Oracle whose bin index is perturbed by a rounded Gaussian whose spread
/// grows with the companded magnitude of the true difference; the index
/// wraps around the circle of bins.
class NoisyOracleEstimator final : public DifferenceEstimator {
 public:
  NoisyOracleEstimator(const BinningScheme& scheme, double noise);
  EstimatorKind kind() const override { return EstimatorKind::kNoisyOracle; }
  bool needs_correspondence() const override { return false; }
  BinLogits estimate(const EstimatorInput& input,
                     const std::optional<ViewpointDelta>& truth) const override;

  /// Circular bin distance between the true and the reported bin for one axis.
  int bin_error(double true_delta, std::uint64_t key) const;

 private:
  int corrupt(int bin, double true_delta, std::uint64_t key) const;

  BinningScheme scheme_;
  double noise_;
};

class ReprojectionEstimator final : public DifferenceEstimator {
 public:
  explicit ReprojectionEstimator(const BinningScheme& scheme, ReprojectionSpec cfg = {});
  EstimatorKind kind() const override { return EstimatorKind::kReprojection; }
  bool needs_correspondence() const override { return true; }
  BinLogits estimate(const EstimatorInput& input,
                     const std::optional<ViewpointDelta>& truth) const override;

  /// The continuous delta before quantization.
  ViewpointDelta search(const EstimatorInput& input) const;

 private:
  BinningScheme scheme_;
  ReprojectionSpec cfg_;
};

std::unique_ptr<DifferenceEstimator> make_estimator(const EstimatorConfig& config,
                                                    const BinningScheme& scheme);

/// Azimuth hypotheses for the coarse initializer. Elevation and tilt are
/// unknown; each hypothesis is scored at its best elevation, tilt and
/// azimuth offset within its own bin.
struct CoarseInitSpec {
  int hypotheses = 16;
  double elevation_prior = 20.0;
  double tilt_prior = 0.0;
  /// Nuisance search: prior +- range at nuisance_step.
  double elevation_range = 20.0;
  double tilt_range = 10.0;
  double nuisance_step = 2.5;
  /// Displacement (pixels) at which a keypoint's agreement drops to exp(-1/2).
  double sigma_px = 2.0;
  /// Render-and-match passes refining the best-scored fit.
  int refine_passes = 4;
  GridSpec refine_grid{2.0, {8.0, 8.0, 8.0}, {{0.5, 2.0}, {0.1, 0.5}, {0.01, 0.1}}};
};

struct CoarseInitResult {
  /// Azimuth of the selected hypothesis with the refined elevation and tilt.
  Viewpoint viewpoint;
  /// Bin nearest to the refined azimuth.
  int hypothesis = 0;
  /// Hypothesis with the highest score, before refinement.
  int best_scored = 0;
  Viewpoint fitted;
  std::vector<double> scores;
};

/// Agreement of keypoint matches with the template posed at v: each match
/// contributes exp(-d^2 / 2 sigma^2) for a reprojection distance of d
/// pixels, and the sum is divided by the number of keypoints visible in the
/// hypothesis render, so unmatched keypoints count as 0.
double coarse_hypothesis_score(std::span<const KeypointMatch> matches, std::size_t visible,
                               const TemplateModel& model, const Viewpoint& v,
                               const CameraModel& camera, double sigma_px);

/// Renders the template at equispaced azimuths (starting at 0), locates the
/// rendered keypoints in `target` and scores each hypothesis. Scores within
/// 1e-9 of the best count as ties and go to the earlier hypothesis. The
/// winner's fitted pose is refined and the hypothesis nearest to the refined
/// azimuth is returned. When no hypothesis scores above 1e-9 the first one
/// is returned at the elevation and tilt priors.
CoarseInitResult coarse_init(const FeatureMap& target, const TemplateModel& model,
                             const CameraModel& camera, const DescriptorSpec& descriptors = {},
                             const CoarseInitSpec& cfg = {});

}  // namespace viewalign
