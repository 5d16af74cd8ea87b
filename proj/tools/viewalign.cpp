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

// Command-line front end: single alignments, batch experiments, bin
// tables, correspondence generation and a correlation throughput check.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "viewalign/alignment.hpp"
#include "viewalign/correspondence.hpp"
#include "viewalign/datagen.hpp"
#include "viewalign/evaluation.hpp"
#include "viewalign/feature_map.hpp"
#include "viewalign/mulaw.hpp"
#include "viewalign/parallel.hpp"
#include "viewalign/seed.hpp"

namespace fs = std::filesystem;
using namespace viewalign;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

Viewpoint to_viewpoint(const std::vector<double>& v) { return Viewpoint(v.at(0), v.at(1), v.at(2)); }

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

struct AlignOptions {
  std::string template_path;
  std::string estimator = "oracle";
  double noise = 0.1;
  int bins = 20;
  double mu = 255.0;
  std::vector<double> tau{2.0};
  int max_iter = 10;
  std::uint64_t seed = 0;
  std::vector<double> truth;
  std::string init = "coarse";
  std::vector<double> start;
  double descriptor_noise = 0.0;
  std::string out;
};

int run_align(const AlignOptions& o) {
  const TemplateModel model = load_template(o.template_path);
  const BinningScheme scheme(o.bins, o.mu);
  EstimatorConfig ec;
  ec.kind = parse_estimator_kind(o.estimator);
  ec.noise = o.noise;
  const auto estimator = make_estimator(ec, scheme);

  Viewpoint truth;
  if (o.truth.empty()) {
    std::mt19937_64 rng(derive_seed(o.seed, 0));
    std::uniform_real_distribution<double> az(-180.0, 180.0), el(0.0, 40.0), ti(-10.0, 10.0);
    const double a = az(rng);
    const double e = el(rng);
    truth = Viewpoint(a, e, ti(rng));
  } else {
    truth = to_viewpoint(o.truth);
  }
  const CameraModel camera;
  const Render target_render = render(model, truth, camera);
  const FeatureMap target =
      descriptor_map(target_render, model, camera, {}, {o.descriptor_noise, 0.0, derive_seed(o.seed, 1)});

  AlignmentContext ctx;
  ctx.model = &model;
  ctx.camera = camera;
  ctx.scheme = &scheme;
  ctx.estimator = estimator.get();
  if (o.tau.size() == 1) {
    ctx.stop.tau.fill(o.tau[0]);
  } else if (o.tau.size() == 3) {
    ctx.stop.tau = {o.tau[0], o.tau[1], o.tau[2]};
  } else {
    throw std::invalid_argument("--tau takes one value or three");
  }
  ctx.stop.max_iterations = o.max_iter;
  ctx.seed = derive_seed(o.seed, 2);
  ctx.stop.validate();

  InitSpec init;
  init.mode = parse_init_mode(o.init);
  init.seed = derive_seed(o.seed, 3);
  if (init.mode == InitMode::kFixed) {
    if (o.start.empty()) throw std::invalid_argument("--init fixed needs --start");
    init.fixed = to_viewpoint(o.start);
  }
  const AlignmentTrajectory t = align(target, truth, ctx, init);
  const std::string summary = trajectory_summary_json(t);
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    auto csv = open_output(dir / "trajectory.csv");
    write_trajectory_csv(csv, t);
    auto js = open_output(dir / "summary.json");
    js << summary;
  }
  std::cout << summary;
  return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out) {
  ExperimentConfig config = load_experiment_config(config_path);
  if (!out.empty()) config.output_dir = out;
  const ExperimentResult result = run_experiment(config);
  std::cout << result.report.to_json();
  return 0;
}

int run_dump_bins(int bins, double mu, const std::string& out) {
  const BinningScheme scheme(bins, mu);
  if (out.empty()) {
    scheme.write_csv(std::cout);
  } else {
    auto os = open_output(out);
    scheme.write_csv(os);
  }
  return 0;
}

struct CorrespondenceOptions {
  std::string template_path;
  std::vector<double> view_a;
  std::vector<double> view_b;
  int samples = 8;
  int negatives = 1;
  std::uint64_t seed = 0;
  std::string pruning;
  std::string out;
};

SkeletalFrame prepared_frame(const TemplateModel& model, const Viewpoint& v,
                             const std::optional<LegOcclusionTable>& table, int samples) {
  const Render r = render(model, v);
  const Keypoints2d kps = keypoints_of(r);
  SkeletalFrame f = prune_visibility(skeletal_frame(kps, model.edges(), samples), r);
  if (table) {
    f = prune_seat(f, seat_polygon(kps, table->seat_ids), table->leg_ids);
    if (const auto o = orientation_vector(kps, *table)) f = prune_self_occluded_legs(f, *o, *table);
  }
  return f;
}

int run_gen_correspondence(const CorrespondenceOptions& o) {
  const TemplateModel model = load_template(o.template_path);
  std::optional<LegOcclusionTable> table;
  if (!o.pruning.empty()) table = load_occlusion_table(o.pruning);
  const SkeletalFrame a = prepared_frame(model, to_viewpoint(o.view_a), table, o.samples);
  const SkeletalFrame b = prepared_frame(model, to_viewpoint(o.view_b), table, o.samples);
  const CorrespondenceSet set = pair_frames(a, b, o.negatives, o.seed);
  if (o.out.empty()) {
    write_correspondence_csv(std::cout, set);
  } else {
    auto os = open_output(o.out);
    write_correspondence_csv(os, set);
  }
  const auto& p = set.provenance;
  std::cerr << "positives " << p.positives << ", negatives " << p.negatives << ", removed: visibility "
            << p.removed_visibility << ", seat " << p.removed_seat << ", self-occlusion "
            << p.removed_self_occlusion << ", omitted edges " << p.omitted_edges << "\n";
  for (const auto& d : p.diagnostics) std::cerr << "note: " << d << "\n";
  return 0;
}

int run_bench_correlate(int size, int dimension, int repeat, int workers) {
  if (size < 1 || dimension < 1 || repeat < 1) throw std::invalid_argument("size, dim and repeat must be >= 1");
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  auto random_map = [&] {
    std::vector<double> raw(static_cast<std::size_t>(size) * static_cast<std::size_t>(size) *
                            static_cast<std::size_t>(dimension));
    for (auto& x : raw) x = normal(rng);
    return FeatureMap::normalized(size, size, dimension, std::move(raw));
  };
  const FeatureMap a = random_map();
  const FeatureMap b = random_map();
  double checksum = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeat; ++i) checksum += correlate(a, b, workers).values().front();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double n = static_cast<double>(size) * size;
  const double pairs = n * n * repeat;
  std::printf("correlate %dx%dx%d, %d runs, %d workers\n", size, size, dimension, repeat,
              workers > 0 ? workers : default_worker_count());
  std::printf("  total %.3f s, %.3f ms/run, %.1f Mpairs/s, %.2f GFLOP/s (checksum %.6g)\n", seconds,
              1e3 * seconds / repeat, pairs / seconds / 1e6, 2.0 * pairs * dimension / seconds / 1e9,
              checksum);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viewalign: iterative viewpoint alignment by render-and-compare"};
  app.require_subcommand(1);

  AlignOptions ao;
  auto* align_cmd = app.add_subcommand("align", "Align a synthetic target from a template");
  align_cmd->add_option("--template", ao.template_path, "Template JSON")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--estimator", ao.estimator, "oracle | noisy-oracle | reprojection")
      ->check(CLI::IsMember({"oracle", "noisy-oracle", "reprojection"}));
  align_cmd->add_option("--noise", ao.noise, "Noisy-oracle noise level");
  align_cmd->add_option("--bins", ao.bins, "Number of bins (even)");
  align_cmd->add_option("--mu", ao.mu, "mu-law parameter");
  align_cmd->add_option("--tau", ao.tau, "Threshold in degrees: one value or three")
      ->delimiter(',')
      ->expected(1, 3);
  align_cmd->add_option("--max-iter", ao.max_iter, "Iteration limit");
  align_cmd->add_option("--seed", ao.seed, "Seed");
  align_cmd->add_option("--truth", ao.truth, "True viewpoint az,el,tilt (default: seeded random)")
      ->delimiter(',')
      ->expected(3);
  align_cmd->add_option("--init", ao.init, "coarse | random | fixed")
      ->check(CLI::IsMember({"coarse", "random", "fixed"}));
  align_cmd->add_option("--start", ao.start, "Initial viewpoint az,el,tilt for --init fixed")
      ->delimiter(',')
      ->expected(3);
  align_cmd->add_option("--descriptor-noise", ao.descriptor_noise, "Target descriptor noise stddev");
  align_cmd->add_option("--out", ao.out, "Output directory for trajectory.csv and summary.json");

  std::string config_path, experiment_out;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a batch experiment from a config");
  exp_cmd->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("--out", experiment_out, "Output directory (overrides the config)");

  int bins = 20;
  double mu = 255.0;
  std::string bins_out;
  auto* bins_cmd = app.add_subcommand("dump-bins", "Write the bin table as CSV");
  bins_cmd->add_option("--bins", bins, "Number of bins (even)");
  bins_cmd->add_option("--mu", mu, "mu-law parameter");
  bins_cmd->add_option("--out", bins_out, "Output file (default: stdout)");

  CorrespondenceOptions co;
  auto* corr_cmd = app.add_subcommand("gen-correspondence", "Generate training correspondences");
  corr_cmd->add_option("--template", co.template_path, "Template JSON")->required()->check(CLI::ExistingFile);
  corr_cmd->add_option("--view-a", co.view_a, "Viewpoint az,el,tilt of image a")->required()->delimiter(',')->expected(3);
  corr_cmd->add_option("--view-b", co.view_b, "Viewpoint az,el,tilt of image b")->required()->delimiter(',')->expected(3);
  corr_cmd->add_option("--samples", co.samples, "Samples per skeleton edge");
  corr_cmd->add_option("--negatives", co.negatives, "Negatives per positive");
  corr_cmd->add_option("--seed", co.seed, "Seed for negative sampling");
  corr_cmd->add_option("--pruning", co.pruning, "Leg occlusion table JSON")->check(CLI::ExistingFile);
  corr_cmd->add_option("--out", co.out, "Output CSV (default: stdout)");

  int size = 32, dimension = 16, repeat = 5, workers = 0;
  auto* bench_cmd = app.add_subcommand("bench-correlate", "Report correlation kernel throughput");
  bench_cmd->add_option("--size", size, "Grid side");
  bench_cmd->add_option("--dim", dimension, "Descriptor dimension");
  bench_cmd->add_option("--repeat", repeat, "Runs");
  bench_cmd->add_option("--workers", workers, "Worker threads (0: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*align_cmd) return run_align(ao);
    if (*exp_cmd) return run_experiment_cmd(config_path, experiment_out);
    if (*bins_cmd) return run_dump_bins(bins, mu, bins_out);
    if (*corr_cmd) return run_gen_correspondence(co);
    if (*bench_cmd) return run_bench_correlate(size, dimension, repeat, workers);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
