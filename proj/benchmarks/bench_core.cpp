#include <benchmark/benchmark.h>

#include "ddlqr/linalg.hpp"
#include "ddlqr/model.hpp"

using namespace ddlqr;

static void BM_SimulatePendulum(benchmark::State& state) {
    const auto setup = make_pendulum();
    for (auto _ : state) {
        auto traj = simulate(setup.sys, setup.excitation, setup.x0,
                             static_cast<int>(state.range(0)), 1);
        benchmark::DoNotOptimize(traj.states.data());
    }
}
BENCHMARK(BM_SimulatePendulum)->Arg(10)->Arg(1000);

BENCHMARK_MAIN();
