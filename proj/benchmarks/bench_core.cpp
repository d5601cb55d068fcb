#include <benchmark/benchmark.h>

#include "stochhom/fem.hpp"
#include "stochhom/linalg.hpp"
#include "stochhom/mesh.hpp"
#include "stochhom/rng.hpp"

using namespace stochhom;

namespace {

linalg::SparseMatrix laplacian_csr(int n) {
    const auto m = mesh::build_structured_mesh({0, 0, 1, 1}, n);
    return fem::assemble_stiffness(m, [](Vec2) { return Mat2::identity(); }, 2);
}

}  // namespace

static void BM_Spmv(benchmark::State& state) {
    const auto K = laplacian_csr(static_cast<int>(state.range(0)));
    std::vector<double> x(K.n_cols, 1.0);
    for (auto _ : state) {
        auto y = linalg::spmv(K, x);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(K.nnz()));
}
BENCHMARK(BM_Spmv)->Arg(32)->Arg(64)->Arg(128);

static void BM_AssembleStiffness(benchmark::State& state) {
    const auto m = mesh::build_structured_mesh({0, 0, 1, 1},
                                               static_cast<int>(state.range(0)));
    const fem::MatFn coeff = [](Vec2 p) {
        return Mat2::scaled_identity(2.0 + std::sin(6.28 * p.x) * std::sin(6.28 * p.y));
    };
    for (auto _ : state) {
        auto K = fem::assemble_stiffness(m, coeff, 2);
        benchmark::DoNotOptimize(K.values.data());
    }
}
BENCHMARK(BM_AssembleStiffness)->Arg(60)->Arg(120);

static void BM_DirichletPoissonSolve(benchmark::State& state) {
    const auto m = mesh::build_structured_mesh({0, 0, 1, 1},
                                               static_cast<int>(state.range(0)));
    const auto K = fem::assemble_stiffness(m, [](Vec2) { return Mat2::identity(); }, 2);
    const auto F = fem::assemble_load(m, [](Vec2) { return 10.0; }, 2);
    const auto sys = fem::apply_dirichlet_zero(K, F, m);
    for (auto _ : state) {
        auto [x, rep] = linalg::cg_solve(sys.stiffness, sys.load);
        benchmark::DoNotOptimize(x.data());
        if (!rep.converged) state.SkipWithError("cg did not converge");
    }
}
BENCHMARK(BM_DirichletPoissonSolve)->Arg(50)->Arg(100);

BENCHMARK_MAIN();
