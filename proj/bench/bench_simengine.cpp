#include <benchmark/benchmark.h>

#include "ssrmap/reproduce.hpp"
#include "ssrmap/simengine.hpp"

using namespace ssrmap;

namespace {

Scenario scenario(long reps) {
    return reproduce::study_scenario("bench", 0.49, 25.0, 60, ReestimationRule::bayes(Estimator::bayes_mean), reps,
                                     20240917);
}

void BM_Serial(benchmark::State& state) {
    const auto sc = scenario(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_scenario_serial(sc));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_OpenMP(benchmark::State& state) {
    const auto sc = scenario(state.range(0));
    const int workers = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(run_scenario(sc, workers));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Serial)->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_OpenMP)->ArgsProduct({{20000}, {1, 2, 4, 8}})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
