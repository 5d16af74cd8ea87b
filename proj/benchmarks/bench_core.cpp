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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "viewalign/correspondence.hpp"
#include "viewalign/feature_map.hpp"
#include "viewalign/mulaw.hpp"
#include "viewalign/renderer.hpp"
#include "viewalign/template_model.hpp"

using namespace viewalign;

namespace {

FeatureMap random_map(int size, int dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(size * size * dim));
  for (auto& x : raw) x = normal(rng);
  return FeatureMap::normalized(size, size, dim, std::move(raw));
}

void BM_Correlate(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const FeatureMap a = random_map(size, dim, 1), b = random_map(size, dim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(correlate(a, b, 1));
  const double cells = static_cast<double>(size) * size;
  state.counters["pairs/s"] = benchmark::Counter(cells * cells, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Correlate)->Args({16, 16})->Args({32, 16})->Args({32, 64})->Unit(benchmark::kMillisecond);

void BM_QuantizeRoundTrip(benchmark::State& state) {
  const BinningScheme scheme = build_scheme(20, 255.0);
  double x = -179.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(scheme.dequantize(scheme.quantize(x)));
    x = x > 179.0 ? -179.5 : x + 0.37;
  }
}
BENCHMARK(BM_QuantizeRoundTrip);

void BM_Render(benchmark::State& state) {
  const TemplateModel model = load_template(VIEWALIGN_DATA_DIR "/templates/chair.json");
  double az = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(render(model, Viewpoint(az, 20.0, 0.0)));
    az += 7.0;
  }
}
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
