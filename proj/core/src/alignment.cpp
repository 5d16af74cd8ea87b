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

#include "viewalign/alignment.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "viewalign/correspondence.hpp"
#include "viewalign/seed.hpp"

namespace viewalign {
namespace {

using json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kCsvHeader =
    "iter,azimuth,elevation,tilt,step_azimuth,step_elevation,step_tilt,geodesic_error,status";

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("trajectory csv: bad number '" + s + "'");
  return v;
}

json angles_json(const Viewpoint& v) { return json::array({v.azimuth(), v.elevation(), v.tilt()}); }

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

struct Observation {
  std::optional<Render> render;
  std::optional<FeatureMap> rendered;
  std::optional<CorrelationTensor> correlation;
  std::optional<DisparityMap> disparity;
};

// Builds the estimator input for a render-role view v against `target`.
EstimatorInput observe(Observation& obs, const FeatureMap& target, const Viewpoint& v,
                       const AlignmentContext& ctx, std::uint64_t noise_key) {
  EstimatorInput in;
  in.model = ctx.model;
  in.camera = &ctx.camera;
  in.target = &target;
  in.noise_key = noise_key;
  in.descriptors = &ctx.descriptors;
  if (ctx.estimator->needs_correspondence()) {
    obs.render = render(*ctx.model, v, ctx.camera);
    obs.rendered = descriptor_map(*obs.render, *ctx.model, ctx.camera, ctx.descriptors);
    obs.correlation = correlate(target, *obs.rendered,
                                obs.render->alpha.downsample(ctx.camera.feature_stride), ctx.workers);
    obs.disparity = stereo_disparity(*ctx.model, v, ctx.camera);
    in.render = &*obs.render;
    in.rendered = &*obs.rendered;
    in.correlation = &*obs.correlation;
    in.disparity = &*obs.disparity;
  }
  return in;
}

void check_context(const AlignmentContext& ctx) {
  if (!ctx.model || !ctx.scheme || !ctx.estimator) {
    throw std::invalid_argument("align: context needs a model, a binning scheme and an estimator");
  }
  ctx.stop.validate();
}

}  // namespace

void StopCriteria::validate() const {
  for (const double t : tau) {
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("StopCriteria: tau must be finite and > 0");
  }
  if (max_iterations < 1) throw std::invalid_argument("StopCriteria: max_iterations must be >= 1");
}

bool StopCriteria::satisfied(const ViewpointDelta& d) const {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) > tau[static_cast<std::size_t>(a)]) return false;
  }
  return true;
}

std::string to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::kConverged: return "converged";
    case TerminalStatus::kIterationLimit: return "iteration-limit";
    case TerminalStatus::kEstimatorFailure: return "estimator-failure";
  }
  return "unknown";
}

TerminalStatus parse_terminal_status(const std::string& name) {
  if (name == "converged") return TerminalStatus::kConverged;
  if (name == "iteration-limit") return TerminalStatus::kIterationLimit;
  if (name == "estimator-failure") return TerminalStatus::kEstimatorFailure;
  throw std::invalid_argument("unknown terminal status: " + name);
}

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kCoarse: return "coarse";
    case InitMode::kRandom: return "random";
    case InitMode::kFixed: return "fixed";
  }
  return "unknown";
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "coarse") return InitMode::kCoarse;
  if (name == "random") return InitMode::kRandom;
  if (name == "fixed") return InitMode::kFixed;
  throw std::invalid_argument("unknown init mode: " + name);
}

double AlignmentTrajectory::final_error() const {
  return truth ? geodesic_distance(final_viewpoint, *truth) : kNaN;
}

void AlignmentTrajectory::check_chain() const {
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.step) throw std::runtime_error("trajectory: failed step before the last record");
    if (apply_delta(r.viewpoint, *r.step) != records[i + 1].viewpoint) {
      throw std::runtime_error("trajectory: record " + std::to_string(i + 2) +
                               " does not follow from the previous step");
    }
  }
}

void write_trajectory_csv(std::ostream& os, const AlignmentTrajectory& t) {
  os << kCsvHeader << '\n';
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    const auto step = r.step ? r.step->components() : std::array<double, 3>{kNaN, kNaN, kNaN};
    os << r.iteration << ',' << fmt(r.viewpoint.azimuth()) << ',' << fmt(r.viewpoint.elevation()) << ','
       << fmt(r.viewpoint.tilt()) << ',' << fmt(step[0]) << ',' << fmt(step[1]) << ',' << fmt(step[2])
       << ',' << fmt(r.geodesic_error) << ','
       << (i + 1 == t.records.size() ? to_string(t.status) : "running") << '\n';
  }
}

AlignmentTrajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) {
    throw std::runtime_error("trajectory csv: missing or unexpected header");
  }
  AlignmentTrajectory t;
  bool terminal_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (terminal_seen) throw std::runtime_error("trajectory csv: rows after the terminal row");
    const auto cells = split(line);
    if (cells.size() != 9) throw std::runtime_error("trajectory csv: expected 9 columns");
    IterationRecord r;
    r.iteration = std::stoi(cells[0]);
    if (r.iteration != t.iterations() + 1) throw std::runtime_error("trajectory csv: iterations out of order");
    r.viewpoint = Viewpoint(parse_double(cells[1]), parse_double(cells[2]), parse_double(cells[3]));
    const double a = parse_double(cells[4]), e = parse_double(cells[5]), tl = parse_double(cells[6]);
    if (!std::isnan(a) && !std::isnan(e) && !std::isnan(tl)) r.step = ViewpointDelta(a, e, tl);
    r.geodesic_error = parse_double(cells[7]);
    if (cells[8] != "running") {
      t.status = parse_terminal_status(cells[8]);
      terminal_seen = true;
    }
    t.records.push_back(r);
  }
  if (!terminal_seen) throw std::runtime_error("trajectory csv: no terminal row");
  t.check_chain();
  t.initial = t.records.front().viewpoint;
  const auto& last = t.records.back();
  t.final_viewpoint = last.step ? apply_delta(last.viewpoint, *last.step) : last.viewpoint;
  return t;
}

std::string trajectory_summary_json(const AlignmentTrajectory& t) {
  json doc;
  doc["status"] = to_string(t.status);
  doc["iterations"] = t.iterations();
  doc["initial"] = angles_json(t.initial);
  doc["final"] = angles_json(t.final_viewpoint);
  doc["truth"] = t.truth ? angles_json(*t.truth) : json(nullptr);
  doc["final_error"] = number_or_null(t.final_error());
  doc["events"] = t.events;
  return doc.dump(2) + "\n";
}

Viewpoint initial_viewpoint(const FeatureMap& target, const AlignmentContext& ctx, const InitSpec& init) {
  switch (init.mode) {
    case InitMode::kFixed: return init.fixed;
    case InitMode::kRandom: {
      std::mt19937_64 rng(init.seed);
      std::uniform_real_distribution<double> az(-180.0, 180.0);
      std::uniform_real_distribution<double> el(init.elevation_range[0], init.elevation_range[1]);
      std::uniform_real_distribution<double> ti(init.tilt_range[0], init.tilt_range[1]);
      const double a = az(rng);
      const double e = el(rng);
      return Viewpoint(a, e, ti(rng));
    }
    case InitMode::kCoarse:
      if (!ctx.model) throw std::invalid_argument("initial_viewpoint: coarse init needs a model");
      return coarse_init(target, *ctx.model, ctx.camera, ctx.descriptors, init.coarse).viewpoint;
  }
  throw std::invalid_argument("initial_viewpoint: unknown mode");
}

AlignmentTrajectory align(const FeatureMap& target, const std::optional<Viewpoint>& truth,
                          const AlignmentContext& ctx, const Viewpoint& initial) {
  check_context(ctx);
  AlignmentTrajectory t;
  t.initial = initial;
  t.truth = truth;
  Viewpoint v = initial;
  for (int i = 1; i <= ctx.stop.max_iterations; ++i) {
    IterationRecord rec;
    rec.iteration = i;
    rec.viewpoint = v;
    rec.geodesic_error = kNaN;
    Observation obs;
    std::optional<ViewpointDelta> true_delta;
    if (truth) true_delta = delta(v, *truth);
    try {
      const EstimatorInput in = observe(obs, target, v, ctx, derive_seed(ctx.seed, static_cast<std::uint64_t>(i)));
      rec.step = decode(ctx.estimator->estimate(in, true_delta), *ctx.scheme);
    } catch (const EstimationError& e) {
      t.events.push_back("iteration " + std::to_string(i) + ": " + e.what());
      t.records.push_back(rec);
      t.status = TerminalStatus::kEstimatorFailure;
      t.final_viewpoint = v;
      return t;
    }
    const Viewpoint next = apply_delta(v, *rec.step);
    if (truth) rec.geodesic_error = geodesic_distance(next, *truth);
    t.records.push_back(rec);
    t.final_viewpoint = next;
    if (ctx.stop.satisfied(*rec.step)) {
      t.status = TerminalStatus::kConverged;
      return t;
    }
    v = next;
  }
  t.status = TerminalStatus::kIterationLimit;
  return t;
}

AlignmentTrajectory align(const FeatureMap& target, const std::optional<Viewpoint>& truth,
                          const AlignmentContext& ctx, const InitSpec& init) {
  check_context(ctx);
  return align(target, truth, ctx, initial_viewpoint(target, ctx, init));
}

AlignmentTrajectory localization_session(const Viewpoint& reference, const CameraFeed& feed,
                                         const AlignmentContext& ctx, const Viewpoint& start) {
  check_context(ctx);
  if (!feed) throw std::invalid_argument("localization_session: empty camera feed");
  AlignmentTrajectory t;
  t.initial = start;
  t.truth = reference;
  Viewpoint camera = start;
  for (int i = 1; i <= ctx.stop.max_iterations; ++i) {
    IterationRecord rec;
    rec.iteration = i;
    rec.viewpoint = camera;
    rec.geodesic_error = kNaN;
    const FeatureMap live = feed(camera);
    Observation obs;
    std::optional<ViewpointDelta> estimate;
    try {
      // The reference plays the render role, the live image the target role,
      // so the estimate is camera - reference.
      const EstimatorInput in =
          observe(obs, live, reference, ctx, derive_seed(ctx.seed, static_cast<std::uint64_t>(i)));
      estimate = decode(ctx.estimator->estimate(in, delta(reference, camera)), *ctx.scheme);
    } catch (const EstimationError& e) {
      t.events.push_back("iteration " + std::to_string(i) + ": " + e.what());
      t.records.push_back(rec);
      t.status = TerminalStatus::kEstimatorFailure;
      t.final_viewpoint = camera;
      return t;
    }
    rec.step = -*estimate;
    const Viewpoint next = apply_delta(camera, *rec.step);
    rec.geodesic_error = geodesic_distance(next, reference);
    t.records.push_back(rec);
    t.final_viewpoint = next;
    if (ctx.stop.satisfied(*estimate)) {
      t.status = TerminalStatus::kConverged;
      return t;
    }
    camera = next;
  }
  t.status = TerminalStatus::kIterationLimit;
  return t;
}

}  // namespace viewalign
