#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "stochhom/config.hpp"
#include "stochhom/pipeline.hpp"

using namespace stochhom;
using namespace stochhom::pipeline;

namespace {

// Test-B variant with no inclusions: the coefficient field is exactly 3*I.
RunConfig constant_field_config() {
    RunConfig c;
    c.test_case = micro::TestCase::b;
    c.n_ellipses = 0;
    c.L = 2;
    c.epsilon = 0.125;
    c.n_cell = 8;
    c.n0 = 100;
    c.n1 = 96;
    return c;
}

RunConfig quick_a1_config() {
    RunConfig c;
    c.test_case = micro::TestCase::a1;
    c.distribution = micro::Distribution::uniform;
    c.epsilon = 0.125;
    c.n_cell = 16;
    c.n0 = 40;
    c.n1 = 32;
    c.L = 12;
    c.master_seed = 7;
    c.workers = 2;
    return c;
}

double nodal_max(const std::vector<double>& v) {
    double m = -1e300;
    for (double x : v) m = std::max(m, x);
    return m;
}

}  // namespace

TEST_CASE("config validation catches the documented violations") {
    RunConfig c;
    c.validate();  // defaults are consistent

    RunConfig bad_eps = c;
    bad_eps.epsilon = 1.0 / 7.0;
    CHECK_THROWS_AS(bad_eps.validate(), ConfigError);  // 1/96 mesh misses 1/7 blocks
    bad_eps.n1 = 98;
    bad_eps.validate();  // consistent override is fine

    RunConfig bad_m = c;
    bad_m.M = 3;  // 8 cells per side not divisible by 3
    CHECK_THROWS_AS(bad_m.validate(), ConfigError);

    RunConfig bad_r = c;
    bad_r.degree = 2;
    CHECK_THROWS_AS(bad_r.validate(), ConfigError);

    RunConfig bad_h1 = c;
    bad_h1.n1 = 100;  // straddles 1/8 block lines
    CHECK_THROWS_AS(bad_h1.validate(), ConfigError);
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, 4, [&](int i) { hits[i]++; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(
        parallel_for(16, 4, [](int i) { if (i == 7) throw SolverError("boom"); }),
        SolverError);
}

TEST_CASE("two-stage on a deterministic constant field reproduces the source solve") {
    RunConfig c = constant_field_config();
    const auto result = algorithm1_two_stage(c);

    // degenerate randomness: zero variance, flagged decomposition
    CHECK(result.stats.variance.a11 == 0.0);
    CHECK(result.decomposition.degenerate);
    CHECK(result.decomposition.delta == 0.0);

    // peak of the constant-coefficient solve: (10/3) * poisson peak
    const double expected_peak = 10.0 / 3.0 * oracles::poisson_unit_square_peak();
    CHECK(std::fabs(nodal_max(result.first_mode.values) - expected_peak) <= 2e-3);
}

TEST_CASE("fixed-geometry randomness collapses to a single sample") {
    RunConfig c;
    c.test_case = micro::TestCase::b;
    c.fixed_geometry = true;
    c.n_ellipses = 4;
    c.L = 3;
    c.n_cell = 16;
    c.n0 = 24;
    c.n1 = 24;
    c.master_seed = 99;
    const auto result = algorithm1_two_stage(c);
    CHECK(result.stats.variance.a11 == 0.0);
    CHECK(result.decomposition.degenerate);

    // u0 equals the piecewise-constant solve with every block set to the
    // single-sample tensor, on the same mesh
    std::map<std::pair<int, int>, homog::EquivalentTensor> blocks;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) blocks[{i, j}] = result.sample_tensors.front();
    const auto mesh1 = make_domain_mesh(c.n1);
    const auto u_eq = solve_equivalent_sample(blocks, *mesh1, c.M * c.epsilon, c.f_value);
    REQUIRE(u_eq.values.size() == result.first_mode.values.size());
    for (std::size_t n = 0; n < u_eq.values.size(); ++n)
        CHECK(u_eq.values[n] ==
              doctest::Approx(result.first_mode.values[n]).epsilon(1e-8));
}

TEST_CASE("equivalent-sample solve matches the constant solve bitwise") {
    std::map<std::pair<int, int>, homog::EquivalentTensor> blocks;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) blocks[{i, j}].m = Mat2::scaled_identity(2.5);
    const auto mesh1 = make_domain_mesh(16);
    const auto u_blocks = solve_equivalent_sample(blocks, *mesh1, 0.25, 10.0);

    const ModeSolver solver(mesh1, Mat2::scaled_identity(2.5));
    const auto u_const = solver.solve_mode0(10.0);
    CHECK(u_blocks.values == u_const.values);  // identical assembly, identical CG
}

TEST_CASE("equivalent-sample solve rejects straddling meshes and missing blocks") {
    std::map<std::pair<int, int>, homog::EquivalentTensor> blocks;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) blocks[{i, j}].m = Mat2::identity();
    const auto bad_mesh = make_domain_mesh(10);  // 10 not divisible by 4 blocks
    CHECK_THROWS_AS(solve_equivalent_sample(blocks, *bad_mesh, 0.25, 10.0), ConfigError);

    blocks.erase({2, 3});
    const auto mesh1 = make_domain_mesh(16);
    CHECK_THROWS_AS(solve_equivalent_sample(blocks, *mesh1, 0.25, 10.0), ConfigError);
}

TEST_CASE("equivalent-sample solve obeys the comparison bound") {
    RunConfig c = quick_a1_config();
    const auto blocks = sample_block_tensors(c, 0);
    double lam_min = 1e300;
    for (const auto& [k, t] : blocks) {
        (void)k;
        lam_min = std::min(lam_min, t.m.sym_eigenvalues()[0]);
    }
    REQUIRE(lam_min > 0.0);

    const auto mesh1 = make_domain_mesh(c.n1);
    const auto u = solve_equivalent_sample(blocks, *mesh1, c.M * c.epsilon, c.f_value);

    const ModeSolver soft(mesh1, Mat2::scaled_identity(lam_min));
    const auto u_soft = soft.solve_mode0(c.f_value);
    for (std::size_t n = 0; n < u.values.size(); ++n) {
        CHECK(u.values[n] >= -1e-10);
        CHECK(u.values[n] <= u_soft.values[n] + 1e-10);
    }
}

TEST_CASE("piecewise two-block solve self-converges under refinement") {
    std::map<std::pair<int, int>, homog::EquivalentTensor> blocks;
    blocks[{0, 0}].m = Mat2::scaled_identity(1.0);
    blocks[{1, 0}].m = Mat2::scaled_identity(4.0);
    // one block column split at x = 1/2, constant in y
    std::map<std::pair<int, int>, homog::EquivalentTensor> grid;
    grid[{0, 0}] = blocks[{0, 0}];
    grid[{1, 0}] = blocks[{1, 0}];
    grid[{0, 1}] = blocks[{0, 0}];
    grid[{1, 1}] = blocks[{1, 0}];

    const auto fine_mesh = make_domain_mesh(128);
    const auto u_fine = solve_equivalent_sample(grid, *fine_mesh, 0.5, 10.0);

    double prev = 0.0;
    for (const int n : {16, 32}) {
        const auto mesh_n = make_domain_mesh(n);
        const auto u_n = solve_equivalent_sample(grid, *mesh_n, 0.5, 10.0);
        const double err = fem::l2_error_cross_mesh(u_n, u_fine);
        if (prev > 0.0) {
            CHECK(err < prev);
            CHECK(prev / err > 2.0);  // at least first order, ~second expected
        }
        prev = err;
    }
    CHECK(prev <= 5e-3 * fem::l2_norm(u_fine));
}

TEST_CASE("reference with one deterministic sample equals the equivalent solve") {
    RunConfig c = constant_field_config();
    c.L = 1;
    c.n1 = 24;
    const auto ref = algorithm2_reference(c, true);
    REQUIRE(ref.sample_values.size() == 1);
    CHECK(ref.mean_field.values == ref.sample_values.front());

    c.L = 3;
    const auto ref3 = algorithm2_reference(c, true);
    CHECK(ref3.sample_values[0] == ref3.sample_values[1]);
    CHECK(ref3.sample_values[1] == ref3.sample_values[2]);
    for (std::size_t n = 0; n < ref3.mean_field.values.size(); ++n)
        CHECK(ref3.mean_field.values[n] ==
              doctest::Approx(ref3.sample_values[0][n]).epsilon(1e-14));
}

TEST_CASE("reference mean is independent of the worker count") {
    RunConfig c = quick_a1_config();
    c.L = 6;
    c.workers = 1;
    const auto r1 = algorithm2_reference(c, false);
    c.workers = 4;
    const auto r4 = algorithm2_reference(c, false);
    CHECK(r1.mean_field.values == r4.mean_field.values);  // bitwise

    const auto t1 = algorithm1_two_stage(c);
    c.workers = 1;
    const auto t2 = algorithm1_two_stage(c);
    CHECK(t1.first_mode.values == t2.first_mode.values);
    CHECK(t1.stats.mean.a11 == t2.stats.mean.a11);
}

TEST_CASE("modes vanish for a degenerate perturbation and reuse the operator") {
    RunConfig c = constant_field_config();
    const auto result = algorithm1_two_stage(c);
    const auto mesh1 = make_domain_mesh(c.n1);
    const ModeSolver solver(mesh1, result.stats.mean);
    const auto u0 = solver.solve_mode0(c.f_value);

    const linalg::SparseMatrix* op = solver.operator_matrix();
    fem::SolutionField prev = u0;
    for (int n = 1; n <= 3; ++n) {
        // a1 == 0 everywhere: every higher mode vanishes
        const auto un = solver.next_mode(prev, [](Vec2) { return Mat2{}; }, n);
        for (double v : un.values) CHECK(std::fabs(v) <= 1e-14);
        CHECK(solver.operator_matrix() == op);  // assembled exactly once
        prev = un;
    }
}

TEST_CASE("first-order mode improves a single-sample approximation") {
    // two-block toy: mean I with a +-15% block fluctuation (delta = 0.15)
    const auto mesh1 = make_domain_mesh(32);
    homog::PerturbationDecomposition dec;
    dec.mean_matrix = Mat2::identity();
    dec.delta = 0.15;
    dec.block_area = 0.25;  // block width 1/2
    dec.a1_blocks[{0, 0}] = Mat2::identity();
    dec.a1_blocks[{1, 0}] = Mat2::identity() * -1.0;
    dec.a1_blocks[{0, 1}] = Mat2::identity();
    dec.a1_blocks[{1, 1}] = Mat2::identity() * -1.0;

    std::map<std::pair<int, int>, homog::EquivalentTensor> blocks;
    for (const auto& [k, a1] : dec.a1_blocks) blocks[k].m = dec.reconstruct(k);
    const auto u_sample = solve_equivalent_sample(blocks, *mesh1, 0.5, 10.0);

    const ModeSolver solver(mesh1, dec.mean_matrix);
    const auto u0 = solver.solve_mode0(10.0);
    const auto u1 = mmc_mode_n(1, solver, u0, dec);

    auto h1_dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
        fem::SolutionField diff;
        diff.mesh = mesh1.get();
        diff.values.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff.values[i] = a[i] - b[i];
        return fem::h1_norm(diff);
    };
    std::vector<double> partial(u0.values.size());
    for (std::size_t i = 0; i < partial.size(); ++i)
        partial[i] = u0.values[i] + dec.delta * u1.values[i];

    const double err0 = h1_dist(u_sample.values, u0.values);
    const double err1 = h1_dist(u_sample.values, partial);
    CHECK(err1 < err0);
    CHECK(err1 < 0.2 * err0);  // first-order correction removes the O(delta) term
}

TEST_CASE("direct solve: guards and constant-coefficient agreement") {
    RunConfig c = constant_field_config();
    CHECK_THROWS_AS(direct_fine_solve(c, 0, 16), ConfigError);  // under-resolved

    const auto direct = direct_fine_solve(c, 0, 64);
    const ModeSolver solver(make_domain_mesh(48), Mat2::scaled_identity(3.0));
    const auto u_const = solver.solve_mode0(c.f_value);
    const double err = relative_error(direct.field, u_const);
    CHECK(err <= 2e-3);  // two discretizations of the same smooth problem
}

TEST_CASE("direct solve self-converges on a random-geometry sample") {
    // Quadrature-sampled curved interfaces at contrast 100 converge at first
    // order, so the check is the refinement ratio against a common fine run.
    RunConfig c;
    c.test_case = micro::TestCase::b;
    c.n_ellipses = 2;
    c.axis_min = 0.18;
    c.axis_max = 0.25;
    c.epsilon = 0.25;
    c.n_cell = 16;
    c.n1 = 16;
    c.master_seed = 11;
    const auto ref = direct_fine_solve(c, 0, 256);
    double prev = 0.0;
    for (const int n : {32, 64, 128}) {
        const auto coarse = direct_fine_solve(c, 0, n);
        const double err = relative_error(coarse.field, ref.field);
        if (prev > 0.0) {
            CHECK(err < prev);
            CHECK(prev / err > 1.4);
        }
        prev = err;
    }
    CHECK(prev < 0.15);
}

TEST_CASE("averaged direct solves sit near the two-stage solution") {
    RunConfig c = quick_a1_config();
    c.L = 48;
    c.n0 = 48;
    const auto two_stage = algorithm1_two_stage(c, false);

    const int n_direct = 8;
    std::vector<std::vector<double>> fields(n_direct);
    MeshPtr fine;
    for (int s = 0; s < n_direct; ++s) {
        auto r = direct_fine_solve(c, s, 96);
        fields[s] = std::move(r.field.values);
        fine = r.mesh;
    }
    fem::SolutionField avg;
    avg.mesh = fine.get();
    avg.values.assign(fields[0].size(), 0.0);
    for (const auto& f : fields)
        for (std::size_t i = 0; i < f.size(); ++i) avg.values[i] += f[i];
    for (double& v : avg.values) v /= n_direct;

    CHECK(relative_error(two_stage.first_mode, avg) < 0.15);
}

TEST_CASE("relative error basics") {
    const auto m = make_domain_mesh(8);
    fem::SolutionField ref;
    ref.mesh = m.get();
    ref.values.resize(m->node_count());
    for (int n = 0; n < m->node_count(); ++n)
        ref.values[n] = 1.0 + m->nodes[n].x * m->nodes[n].y;
    CHECK(relative_error(ref, ref) == doctest::Approx(0.0).epsilon(1e-14));

    fem::SolutionField scaled = ref;
    for (double& v : scaled.values) v *= 1.1;
    CHECK(relative_error(scaled, ref) == doctest::Approx(0.1).epsilon(1e-10));

    fem::SolutionField zero = ref;
    for (double& v : zero.values) v = 0.0;
    CHECK_THROWS_AS(relative_error(ref, zero), ConfigError);
}

TEST_CASE("variance decay study: degenerate and decreasing cases") {
    RunConfig det = constant_field_config();
    det.L = 4;
    const auto degenerate = variance_decay_study(det, {1, 2});
    CHECK(degenerate.degenerate);
    CHECK(!std::isfinite(degenerate.slope));

    RunConfig c = quick_a1_config();
    c.n_cell = 12;
    c.L = 48;
    const auto study = variance_decay_study(c, {1, 2});
    const auto& var = study.observable("var_a11");
    CHECK(var[1] < var[0]);
    CHECK(-study.slope > 0.0);
    const auto& delta = study.observable("delta");
    CHECK(delta[1] < delta[0]);
}

TEST_CASE("delta scaling study shows the quadratic response") {
    RunConfig c = quick_a1_config();
    c.epsilon = 0.25;  // 16 blocks keep it quick
    c.n_cell = 12;
    c.n1 = 16;
    c.study.samples = 6;
    const auto study = delta_scaling_study(c, {0.25, 0.5, 1.0});
    CHECK(study.slope == doctest::Approx(2.0).epsilon(0.25));

    const auto& err2 = study.observable("mean_sq_h1_error");
    CHECK(err2[1] / err2[0] == doctest::Approx(4.0).epsilon(0.4));  // halving s quarters it
}

TEST_CASE("delta scaling study rejects a degenerate decomposition") {
    RunConfig det = constant_field_config();
    det.study.samples = 4;
    det.n1 = 16;
    CHECK_THROWS_AS(delta_scaling_study(det, {0.5, 1.0}), ConfigError);
}

TEST_CASE("sample count study shows the L^-1 variance rate") {
    RunConfig c = quick_a1_config();
    c.n_cell = 8;
    c.study.replicates = 8;
    const auto study = sample_count_study(c, {4, 16});
    CHECK(study.slope == doctest::Approx(-1.0).epsilon(0.5));
}

TEST_CASE("nested empirical means stabilize") {
    RunConfig c = quick_a1_config();
    c.n_cell = 12;
    c.L = 256;
    c.workers = 4;
    const auto result = algorithm1_two_stage(c, false);
    std::vector<double> prefix_mean(c.L + 1, 0.0);
    double acc = 0.0;
    for (int s = 0; s < c.L; ++s) {
        acc += result.sample_tensors[s].m.a11;
        prefix_mean[s + 1] = acc / (s + 1);
    }
    const double first_gap = std::fabs(prefix_mean[2] - prefix_mean[1]);
    for (const int L : {64, 128}) {
        CHECK(std::fabs(prefix_mean[2 * L] - prefix_mean[L]) < first_gap);
    }
}

TEST_CASE("periodization comparison study produces finite paired errors") {
    RunConfig c = quick_a1_config();
    c.distribution = micro::Distribution::truncated_normal;
    c.diagonal_only = true;
    c.n_cell = 8;
    c.study.replicates = 2;
    const auto study = periodization_comparison_study(c, {2, 4});
    const auto& err = study.observable("error");
    for (double e : err) {
        CHECK(std::isfinite(e));
        CHECK(e < 0.5);
    }
    CHECK(study.abscissa == std::vector<double>{4.0, 16.0});
}

TEST_CASE("consistency triangle at desk scale") {
    RunConfig c = quick_a1_config();
    c.L = 100;
    c.n_cell = 12;
    c.n0 = 48;
    c.n1 = 48;
    c.workers = 4;
    const auto a1 = algorithm1_two_stage(c, false);
    const auto a2 = algorithm2_reference(c, false);

    const int n_direct = 6;
    std::vector<std::vector<double>> fields(n_direct);
    MeshPtr fine;
    for (int s = 0; s < n_direct; ++s) {
        auto r = direct_fine_solve(c, s, 64);
        fields[s] = std::move(r.field.values);
        fine = r.mesh;
    }
    fem::SolutionField avg;
    avg.mesh = fine.get();
    avg.values.assign(fields[0].size(), 0.0);
    for (const auto& f : fields)
        for (std::size_t i = 0; i < f.size(); ++i) avg.values[i] += f[i];
    for (double& v : avg.values) v /= n_direct;

    const double err_ref = relative_error(a1.first_mode, a2.mean_field);
    const double err_direct = relative_error(a1.first_mode, avg);
    CHECK(err_ref <= err_direct + 0.05);
}
