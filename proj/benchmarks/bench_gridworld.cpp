#include <benchmark/benchmark.h>

#include "roverplan/dataset.hpp"
#include "roverplan/ops.hpp"
#include "roverplan/random.hpp"
#include "roverplan/terrain.hpp"

using namespace roverplan;

namespace {

void BM_ExpertLabels(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const GridMap map = generate_map(7, size, size, 0.2);
  for (auto _ : state) {
    const DistanceField d = expert_distances(map);
    benchmark::DoNotOptimize(optimal_actions(map, d));
  }
}

void BM_CraterScene(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(render_crater_scene(seed++, size, size, 6, {2.0, 6.0}));
}

void BM_Conv20x20(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor x({1, 20, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
  Tensor w({20, 20, 3, 3});
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : w.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward<float>(x, w, nullptr, 1, Padding::Same));
}

}  // namespace

BENCHMARK(BM_ExpertLabels)->Arg(16)->Arg(64)->Arg(128);
BENCHMARK(BM_CraterScene)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv20x20)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);
