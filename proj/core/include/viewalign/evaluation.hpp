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
#include <span>
#include <string>
#include <vector>

#include "viewalign/alignment.hpp"
#include "viewalign/estimator.hpp"
#include "viewalign/renderer.hpp"

namespace viewalign {

/// Median; the mean of the two central values for even counts.
/// Throws std::invalid_argument for an empty list.
double med_err(std::span<const double> errors);

/// Fraction of errors strictly below theta (degrees, > 0).
double acc_at(std::span<const double> errors, double theta);

/// Flat, versioned experiment description. Relative paths are resolved
/// against the directory of the config file.
struct ExperimentConfig {
  int version = 1;
  std::string template_file;  // as written in the config
  std::filesystem::path template_path;
  EstimatorConfig estimator;
  int n_bins = 20;
  double mu = 255.0;
  StopCriteria stop;
  int trials = 0;
  std::uint64_t seed = 0;
  InitMode init = InitMode::kRandom;
  /// Pseudo-real targets: descriptor noise and template shape jitter.
  double descriptor_noise = 0.0;
  double dropout = 0.0;
  double keypoint_jitter = 0.0;
  double scale_jitter = 0.0;
  /// True viewpoints: azimuth uniform over the circle, elevation and tilt
  /// uniform over these ranges.
  std::array<double, 2> truth_elevation_range{0.0, 40.0};
  std::array<double, 2> truth_tilt_range{-10.0, 10.0};
  std::vector<double> acc_thresholds{30.0, 22.5, 15.0};
  std::filesystem::path output_dir;
  /// 0 uses every hardware thread; results do not depend on it.
  int workers = 0;

  /// Throws std::invalid_argument describing the first invalid field.
  void validate() const;
};

/// Parses a config document; unknown keys and out-of-range values are
/// rejected with std::invalid_argument.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct AccuracyEntry {
  double theta = 0.0;
  double value = 0.0;
};

struct MetricsReport {
  std::string estimator;
  int trials = 0;
  int completed = 0;  // trials without estimator failure
  int failures = 0;
  int converged = 0;
  double mean_iterations = 0.0;  // over completed trials
  double med_err = 0.0;          // NaN when no trial completed
  std::vector<AccuracyEntry> accuracy;
  /// Entry L-1: median error had the loop been limited to L iterations.
  std::vector<double> median_error_by_iteration;

  /// Deterministic JSON document.
  std::string to_json() const;
};

/// Aggregates completed trajectories (failures are counted, not measured).
MetricsReport summarize(std::span<const AlignmentTrajectory> trajectories, const std::string& estimator,
                        std::span<const double> acc_thresholds, int max_iterations);

struct TrialResult {
  Viewpoint truth;
  AlignmentTrajectory trajectory;
};

/// Builds the pseudo-real target of trial `index` and aligns to it.
TrialResult run_trial(const ExperimentConfig& config, const TemplateModel& model, int index);

struct ExperimentResult {
  MetricsReport report;
  std::vector<TrialResult> trials;
};

/// Runs every trial (concurrently), writes <output_dir>/report.json and
/// <output_dir>/trajectories/trial_NNNN.csv when output_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Reads every trial_*.csv under `trajectory_dir` in name order.
std::vector<AlignmentTrajectory> read_trajectories(const std::filesystem::path& trajectory_dir);

}  // namespace viewalign
