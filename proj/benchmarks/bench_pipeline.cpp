#include <benchmark/benchmark.h>

#include "stochhom/homogenize.hpp"
#include "stochhom/pipeline.hpp"

using namespace stochhom;

// One equivalent-tensor evaluation (two periodic cell solves plus the energy
// integral) at the mesh sizes the experiments use.
static void BM_EquivalentTensor(benchmark::State& state) {
    micro::MicrostructureParams mp;
    mp.test_case = micro::TestCase::a1;
    mp.distribution = micro::Distribution::uniform;
    mp.master_seed = 1;
    const auto realization = micro::make_realization(mp, 0, 1, 1);
    const auto field = micro::make_coefficient_field(mp, realization, 0.125, false);
    const auto m = mesh::build_structured_mesh({0, 0, 1, 1},
                                               static_cast<int>(state.range(0)));
    homog::CellProblemSetup setup;
    setup.mesh = &m;
    setup.coefficient = field.cell_fn();
    for (auto _ : state) {
        auto t = homog::compute_equivalent(setup, field.alpha, field.beta);
        benchmark::DoNotOptimize(t.m.a11);
    }
}
BENCHMARK(BM_EquivalentTensor)->Arg(30)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

static void BM_TakeAndPlace(benchmark::State& state) {
    const int count = static_cast<int>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        Rng rng(seed++, 0, 0, 0);
        auto g = micro::take_and_place(count, 0.02, 0.04, rng);
        benchmark::DoNotOptimize(g.ellipses.data());
    }
}
BENCHMARK(BM_TakeAndPlace)->Arg(10)->Arg(70);

static void BM_TwoStageTiny(benchmark::State& state) {
    pipeline::RunConfig c;
    c.test_case = micro::TestCase::a1;
    c.distribution = micro::Distribution::uniform;
    c.n_cell = 16;
    c.n0 = 40;
    c.L = 8;
    c.workers = 1;
    for (auto _ : state) {
        auto r = pipeline::algorithm1_two_stage(c, false);
        benchmark::DoNotOptimize(r.stats.mean.a11);
    }
}
BENCHMARK(BM_TwoStageTiny)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
