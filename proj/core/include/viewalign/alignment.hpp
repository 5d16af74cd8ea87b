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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "viewalign/estimator.hpp"
#include "viewalign/feature_map.hpp"
#include "viewalign/mulaw.hpp"
#include "viewalign/renderer.hpp"
#include "viewalign/template_model.hpp"
#include "viewalign/viewpoint.hpp"

namespace viewalign {

struct StopCriteria {
  /// Per-axis thresholds (degrees) on the decoded step.
  std::array<double, 3> tau{2.0, 2.0, 2.0};
  int max_iterations = 10;

  /// Throws std::invalid_argument for non-positive or non-finite thresholds
  /// or max_iterations < 1.
  void validate() const;
  /// Every |d| component <= its threshold.
  bool satisfied(const ViewpointDelta& d) const;
};

enum class TerminalStatus { kConverged, kIterationLimit, kEstimatorFailure };

std::string to_string(TerminalStatus status);
TerminalStatus parse_terminal_status(const std::string& name);

struct IterationRecord {
  int iteration = 0;  // 1-based
  /// Viewpoint whose render was compared at this iteration.
  Viewpoint viewpoint;
  /// Step applied to `viewpoint` afterwards; empty when the estimator failed.
  std::optional<ViewpointDelta> step;
  /// Geodesic error of apply_delta(viewpoint, step) against the truth; NaN
  /// when the truth is unknown or the estimator failed.
  double geodesic_error = 0.0;
};

/// Record of one alignment run. Consecutive records chain:
/// records[i+1].viewpoint == apply_delta(records[i].viewpoint, *records[i].step).
struct AlignmentTrajectory {
  std::vector<IterationRecord> records;
  TerminalStatus status = TerminalStatus::kIterationLimit;
  Viewpoint initial;
  Viewpoint final_viewpoint;
  std::optional<Viewpoint> truth;
  std::vector<std::string> events;

  int iterations() const { return static_cast<int>(records.size()); }
  /// geodesic_distance(final_viewpoint, truth), or NaN without a truth.
  double final_error() const;
  /// Throws std::runtime_error when the chaining invariant is violated.
  void check_chain() const;
};

/// CSV: iter,azimuth,elevation,tilt,step_azimuth,step_elevation,step_tilt,geodesic_error,status
/// The status column is "running" on every row but the last, which holds
/// the terminal status. Failed steps are written as nan.
void write_trajectory_csv(std::ostream& os, const AlignmentTrajectory& t);
/// Parses the CSV and checks the chaining invariant. final_viewpoint is
/// rebuilt from the last row; truth is not stored and stays empty.
AlignmentTrajectory read_trajectory_csv(std::istream& is);

/// Deterministic JSON summary (status, iterations, initial/final/truth
/// viewpoints, final error, events).
std::string trajectory_summary_json(const AlignmentTrajectory& t);

enum class InitMode { kCoarse, kRandom, kFixed };

std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& name);

struct InitSpec {
  InitMode mode = InitMode::kCoarse;
  Viewpoint fixed;
  /// Random init draws azimuth uniformly and elevation/tilt from these ranges.
  std::array<double, 2> elevation_range{0.0, 40.0};
  std::array<double, 2> tilt_range{-10.0, 10.0};
  std::uint64_t seed = 0;
  CoarseInitSpec coarse;
};

/// Shared, read-only settings of an alignment run.
struct AlignmentContext {
  const TemplateModel* model = nullptr;
  CameraModel camera;
  DescriptorSpec descriptors;
  const BinningScheme* scheme = nullptr;
  const DifferenceEstimator* estimator = nullptr;
  StopCriteria stop;
  /// Base of the per-iteration estimator noise keys.
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Initial viewpoint according to `init`.
Viewpoint initial_viewpoint(const FeatureMap& target, const AlignmentContext& ctx, const InitSpec& init);

/// Render-and-compare loop: render at the current viewpoint, estimate the
/// difference to the target, decode and apply it. Stops once every decoded
/// component is within its threshold ("converged", also when this happens
/// on the last allowed iteration), at the iteration limit, or when the
/// estimator fails. The final estimate includes the last decoded step.
AlignmentTrajectory align(const FeatureMap& target, const std::optional<Viewpoint>& truth,
                          const AlignmentContext& ctx, const Viewpoint& initial);

AlignmentTrajectory align(const FeatureMap& target, const std::optional<Viewpoint>& truth,
                          const AlignmentContext& ctx, const InitSpec& init);

/// Camera feed of the localization simulation: the descriptor map observed
/// from a camera viewpoint.
using CameraFeed = std::function<FeatureMap(const Viewpoint&)>;

/// Closed-loop active localization. The reference image (known viewpoint
/// `reference`) stays fixed while the camera moves: each iteration compares
/// the live feed against the reference and moves the camera by the negated
/// decoded difference. Records store the camera viewpoints and the applied
/// camera motion, so the chaining invariant holds as in align; errors are
/// measured against `reference`.
AlignmentTrajectory localization_session(const Viewpoint& reference, const CameraFeed& feed,
                                         const AlignmentContext& ctx, const Viewpoint& start);

}  // namespace viewalign
