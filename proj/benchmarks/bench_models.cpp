#include <benchmark/benchmark.h>

#include <vector>

#include "roverplan/planner.hpp"
#include "roverplan/training.hpp"

using namespace roverplan;

namespace {

ModelSpec spec_of(Arch arch, int size) {
  ModelSpec s;
  s.arch = arch;
  s.height = s.width = size;
  s.k_vin = size + size / 4;
  return s;
}

// Q-map for every cell of one map.
void BM_ForwardQmap(benchmark::State& state) {
  const auto arch = static_cast<Arch>(state.range(0));
  const int size = static_cast<int>(state.range(1));
  const auto model = build_model(spec_of(arch, size), 1);
  const Tensor x = input_tensor(make_record(generate_map(3, size, size, 0.2)));
  for (auto _ : state) benchmark::DoNotOptimize(model->forward_qmap(x));
  state.SetLabel(std::string(to_string(arch)));
}

// One training step over every labeled cell of a single map.
void BM_TrainStep(benchmark::State& state) {
  const auto arch = static_cast<Arch>(state.range(0));
  const int size = static_cast<int>(state.range(1));
  const auto model = build_model(spec_of(arch, size), 1);
  std::vector<MapRecord> recs{make_record(generate_map(4, size, size, 0.2))};
  const Dataset ds = build_dataset(std::move(recs), 1, 0.0);
  const std::vector<Tensor> inputs{input_tensor(ds.maps[0])};
  const Hyperparams hyper;
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_batch(*model, ds, inputs, ds.entries, hyper));
    sgd_step(model->params(), 1e-6);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.entries.size()));
  state.SetLabel(std::string(to_string(arch)));
}

// Ten rovers planned from one Q-map.
void BM_PlanMulti(benchmark::State& state) {
  const auto model = build_model(spec_of(Arch::DBCNN, 32), 1);
  const MapRecord rec = make_record(generate_map(5, 32, 32, 0.2));
  std::vector<Coord> starts;
  for (std::size_t i = 0; i < rec.map.cell_count() && starts.size() < 10; i += 37) {
    if (rec.labels.labeled(rec.map.coord(i))) starts.push_back(rec.map.coord(i));
  }
  for (auto _ : state) benchmark::DoNotOptimize(plan_multi(*model, rec, starts));
}

void arch_sizes(benchmark::internal::Benchmark* b) {
  for (Arch a : {Arch::DBCNN, Arch::VIN, Arch::RESNET, Arch::DCNN}) {
    for (int size : {16, 32, 64}) b->Args({static_cast<int>(a), size});
  }
}

}  // namespace

BENCHMARK(BM_ForwardQmap)->Apply(arch_sizes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrainStep)->Apply(arch_sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PlanMulti)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
