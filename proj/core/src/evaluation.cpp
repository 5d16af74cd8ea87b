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

#include "viewalign/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "viewalign/datagen.hpp"
#include "viewalign/feature_map.hpp"
#include "viewalign/parallel.hpp"
#include "viewalign/seed.hpp"

namespace viewalign {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string> kConfigKeys{
    "version",          "template",       "estimator",        "estimator_noise",
    "bins",             "mu",             "tau",              "max_iterations",
    "trials",           "seed",           "init",             "descriptor_noise",
    "dropout",          "keypoint_jitter", "scale_jitter",    "truth_elevation_range",
    "truth_tilt_range", "acc_thresholds", "output_dir",       "workers"};

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("experiment config: " + message);
}

bool finite(double x) { return std::isfinite(x); }

template <class T>
T get(const json& doc, const char* key, const T& fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("experiment config: wrong type for '") + key + "'");
  }
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double trial_error(const AlignmentTrajectory& t, int limit) {
  const auto row = std::min<std::size_t>(static_cast<std::size_t>(limit), t.records.size());
  return t.records[row - 1].geodesic_error;
}

}  // namespace

double med_err(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("med_err: empty error list");
  std::vector<double> v(errors.begin(), errors.end());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

double acc_at(std::span<const double> errors, double theta) {
  if (errors.empty()) throw std::invalid_argument("acc_at: empty error list");
  if (!(theta > 0.0)) throw std::invalid_argument("acc_at: theta must be > 0");
  const auto hits = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < theta; });
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

void ExperimentConfig::validate() const {
  require(version == 1, "unsupported version");
  require(trials >= 1, "trials must be >= 1");
  require(n_bins >= 4 && n_bins % 2 == 0, "bins must be even and >= 4");
  require(finite(mu) && mu > 0.0, "mu must be > 0");
  for (const double t : stop.tau) require(finite(t) && t > 0.0, "tau must be > 0");
  require(stop.max_iterations >= 1, "max_iterations must be >= 1");
  require(finite(estimator.noise) && estimator.noise >= 0.0, "estimator_noise must be >= 0");
  require(finite(descriptor_noise) && descriptor_noise >= 0.0, "descriptor_noise must be >= 0");
  require(finite(dropout) && dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  require(finite(keypoint_jitter) && keypoint_jitter >= 0.0, "keypoint_jitter must be >= 0");
  require(finite(scale_jitter) && scale_jitter >= 0.0, "scale_jitter must be >= 0");
  for (const auto& r : {truth_elevation_range, truth_tilt_range}) {
    require(finite(r[0]) && finite(r[1]) && r[0] <= r[1], "ranges must be ordered [lo, hi]");
    require(r[0] > -90.0 && r[1] < 90.0, "elevation and tilt ranges must lie in (-90, 90)");
  }
  require(!acc_thresholds.empty(), "acc_thresholds must not be empty");
  for (const double t : acc_thresholds) require(finite(t) && t > 0.0, "acc_thresholds must be > 0");
  require(workers >= 0, "workers must be >= 0");
  require(!template_path.empty(), "template is required");
  require(fs::is_regular_file(template_path), "template file not found: " + template_file);
}

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("experiment config: ") + e.what());
  }
  require(doc.is_object(), "document must be an object");
  for (const auto& [key, value] : doc.items()) {
    require(kConfigKeys.count(key) == 1, "unknown key '" + key + "'");
  }
  for (const char* key : {"version", "template", "estimator", "trials", "seed"}) {
    require(doc.contains(key), std::string("missing required key '") + key + "'");
  }

  ExperimentConfig c;
  c.version = get<int>(doc, "version", 1);
  c.template_file = get<std::string>(doc, "template", "");
  c.template_path = base_dir / c.template_file;
  c.estimator.kind = parse_estimator_kind(get<std::string>(doc, "estimator", "oracle"));
  c.estimator.noise = get<double>(doc, "estimator_noise", 0.0);
  c.n_bins = get<int>(doc, "bins", c.n_bins);
  c.mu = get<double>(doc, "mu", c.mu);
  if (doc.contains("tau")) {
    const json& tau = doc.at("tau");
    if (tau.is_number()) {
      c.stop.tau.fill(tau.get<double>());
    } else {
      c.stop.tau = get<std::array<double, 3>>(doc, "tau", c.stop.tau);
    }
  }
  c.stop.max_iterations = get<int>(doc, "max_iterations", c.stop.max_iterations);
  c.trials = get<int>(doc, "trials", 0);
  c.seed = get<std::uint64_t>(doc, "seed", 0);
  c.init = parse_init_mode(get<std::string>(doc, "init", "random"));
  require(c.init != InitMode::kFixed, "init must be 'coarse' or 'random'");
  c.descriptor_noise = get<double>(doc, "descriptor_noise", 0.0);
  c.dropout = get<double>(doc, "dropout", 0.0);
  c.keypoint_jitter = get<double>(doc, "keypoint_jitter", 0.0);
  c.scale_jitter = get<double>(doc, "scale_jitter", 0.0);
  c.truth_elevation_range = get<std::array<double, 2>>(doc, "truth_elevation_range", c.truth_elevation_range);
  c.truth_tilt_range = get<std::array<double, 2>>(doc, "truth_tilt_range", c.truth_tilt_range);
  c.acc_thresholds = get<std::vector<double>>(doc, "acc_thresholds", c.acc_thresholds);
  if (doc.contains("output_dir")) c.output_dir = base_dir / get<std::string>(doc, "output_dir", "");
  c.workers = get<int>(doc, "workers", 0);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

std::string MetricsReport::to_json() const {
  json doc;
  doc["format"] = "viewalign-report";
  doc["version"] = 1;
  doc["estimator"] = estimator;
  doc["trials"] = trials;
  doc["completed"] = completed;
  doc["failures"] = failures;
  doc["converged"] = converged;
  doc["mean_iterations"] = number_or_null(mean_iterations);
  doc["med_err"] = number_or_null(med_err);
  json acc = json::array();
  for (const auto& a : accuracy) acc.push_back({{"theta", a.theta}, {"value", number_or_null(a.value)}});
  doc["accuracy"] = acc;
  json curve = json::array();
  for (const double m : median_error_by_iteration) curve.push_back(number_or_null(m));
  doc["median_error_by_iteration"] = curve;
  return doc.dump(2) + "\n";
}

MetricsReport summarize(std::span<const AlignmentTrajectory> trajectories, const std::string& estimator,
                        std::span<const double> acc_thresholds, int max_iterations) {
  MetricsReport r;
  r.estimator = estimator;
  r.trials = static_cast<int>(trajectories.size());
  std::vector<const AlignmentTrajectory*> done;
  for (const auto& t : trajectories) {
    if (t.records.empty()) throw std::invalid_argument("summarize: empty trajectory");
    if (t.status == TerminalStatus::kEstimatorFailure) {
      ++r.failures;
      continue;
    }
    done.push_back(&t);
    if (t.status == TerminalStatus::kConverged) ++r.converged;
  }
  r.completed = static_cast<int>(done.size());
  std::vector<double> thresholds(acc_thresholds.begin(), acc_thresholds.end());
  std::sort(thresholds.begin(), thresholds.end());
  if (done.empty()) {
    r.mean_iterations = kNaN;
    r.med_err = kNaN;
    for (const double th : thresholds) r.accuracy.push_back({th, kNaN});
    r.median_error_by_iteration.assign(static_cast<std::size_t>(max_iterations), kNaN);
    return r;
  }
  double iterations = 0.0;
  std::vector<double> finals;
  for (const auto* t : done) {
    iterations += t->iterations();
    finals.push_back(trial_error(*t, t->iterations()));
  }
  r.mean_iterations = iterations / static_cast<double>(done.size());
  r.med_err = med_err(finals);
  for (const double th : thresholds) r.accuracy.push_back({th, acc_at(finals, th)});
  for (int limit = 1; limit <= max_iterations; ++limit) {
    std::vector<double> at_limit;
    for (const auto* t : done) at_limit.push_back(trial_error(*t, limit));
    r.median_error_by_iteration.push_back(med_err(at_limit));
  }
  return r;
}

TrialResult run_trial(const ExperimentConfig& config, const TemplateModel& model, int index) {
  const std::uint64_t trial_seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
  std::mt19937_64 rng(trial_seed);
  std::uniform_real_distribution<double> az(-180.0, 180.0);
  std::uniform_real_distribution<double> el(config.truth_elevation_range[0], config.truth_elevation_range[1]);
  std::uniform_real_distribution<double> ti(config.truth_tilt_range[0], config.truth_tilt_range[1]);
  const double a = az(rng);
  const double e = el(rng);
  const Viewpoint truth(a, e, ti(rng));

  const CameraModel camera;
  const DescriptorSpec descriptors;
  const TemplateModel instance = perturb_template(
      model, {config.keypoint_jitter, config.scale_jitter, derive_seed(trial_seed, 1)});
  const Render target_render = render(instance, truth, camera);
  const FeatureMap target = descriptor_map(target_render, instance, camera, descriptors,
                                           {config.descriptor_noise, config.dropout, derive_seed(trial_seed, 2)});

  const BinningScheme scheme(config.n_bins, config.mu);
  const auto estimator = make_estimator(config.estimator, scheme);
  AlignmentContext ctx;
  ctx.model = &model;
  ctx.camera = camera;
  ctx.descriptors = descriptors;
  ctx.scheme = &scheme;
  ctx.estimator = estimator.get();
  ctx.stop = config.stop;
  ctx.seed = derive_seed(trial_seed, 4);
  InitSpec init;
  init.mode = config.init;
  init.seed = derive_seed(trial_seed, 3);
  return {truth, align(target, truth, ctx, init)};
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const TemplateModel model = load_template(config.template_path);
  ExperimentResult out;
  out.trials.resize(static_cast<std::size_t>(config.trials));
  parallel_for(out.trials.size(), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out.trials[i] = run_trial(config, model, static_cast<int>(i));
  }, config.workers);

  std::vector<AlignmentTrajectory> trajectories;
  trajectories.reserve(out.trials.size());
  for (const auto& t : out.trials) trajectories.push_back(t.trajectory);
  out.report = summarize(trajectories, to_string(config.estimator.kind), config.acc_thresholds,
                         config.stop.max_iterations);

  if (!config.output_dir.empty()) {
    const fs::path dir = config.output_dir / "trajectories";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "trial_%04zu.csv", i);
      std::ofstream os(dir / name);
      write_trajectory_csv(os, trajectories[i]);
      if (!os) throw std::runtime_error("cannot write trajectory " + (dir / name).string());
    }
    std::ofstream os(config.output_dir / "report.json");
    os << out.report.to_json();
    if (!os) throw std::runtime_error("cannot write report.json");
  }
  return out;
}

std::vector<AlignmentTrajectory> read_trajectories(const fs::path& trajectory_dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(trajectory_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("trial_", 0) == 0 && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<AlignmentTrajectory> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot open " + f.string());
    out.push_back(read_trajectory_csv(in));
  }
  return out;
}

}  // namespace viewalign
