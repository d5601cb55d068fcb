#include "stochhom/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace stochhom::pipeline {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

void validate_square_alignment(const micro::CellGeometry& g, int n_per_unit) {
    if (g.kind != micro::CellGeometry::Kind::square_inclusion) return;
    const double lo = g.lo * n_per_unit;
    const double hi = g.hi * n_per_unit;
    if (std::fabs(lo - std::lround(lo)) > 1e-9 || std::fabs(hi - std::lround(hi)) > 1e-9)
        throw ConfigError("h: the square inclusion (" + fmt(g.lo) + ", " + fmt(g.hi) +
                          ") is not grid-aligned at n=" + std::to_string(n_per_unit) +
                          " subdivisions per unit (n must make lo*n and hi*n integers)");
}

// Equivalent tensor of one M-cell realization; offsets address the unit-cell
// index space so domain blocks reproduce the draws of larger realizations.
homog::EquivalentTensor cell_tensor(const RunConfig& config,
                                    const micro::MicrostructureParams& mp,
                                    const mesh::TriMesh& cell_mesh, int sample_index,
                                    int off_i, int off_j) {
    auto realization =
        micro::make_realization(mp, sample_index, config.M, config.M, off_i, off_j);
    const auto field = micro::make_coefficient_field(mp, std::move(realization),
                                                     config.epsilon, config.diagonal_only);
    validate_square_alignment(field.realization.geometry_at(0, 0),
                              config.cell_subdivisions());
    homog::CellProblemSetup setup;
    setup.mesh = &cell_mesh;
    setup.coefficient = field.cell_fn();
    setup.quadrature_order = config.quadrature_order;
    try {
        auto tensor = homog::compute_equivalent(setup, field.alpha, field.beta);
        tensor.sample_index = sample_index;
        return tensor;
    } catch (const SolverError& e) {
        throw SolverError("sample " + std::to_string(sample_index) + ", block offset (" +
                          std::to_string(off_i) + "," + std::to_string(off_j) +
                          "): " + e.what());
    }
}

std::shared_ptr<mesh::TriMesh> make_cell_mesh(int m_cells, int n_per_unit) {
    return std::make_shared<mesh::TriMesh>(mesh::build_structured_mesh(
        {0.0, 0.0, static_cast<double>(m_cells), static_cast<double>(m_cells)}, n_per_unit));
}

std::vector<double> reduce_load(const fem::DofMap& map, const std::vector<double>& full) {
    std::vector<double> reduced(map.n_dofs, 0.0);
    for (std::size_t n = 0; n < full.size(); ++n)
        if (map.node_to_dof[n] >= 0) reduced[map.node_to_dof[n]] += full[n];
    return reduced;
}

}  // namespace

int RunConfig::cells_per_side() const {
    return static_cast<int>(std::lround(1.0 / epsilon));
}

int RunConfig::blocks_per_side() const { return cells_per_side() / M; }

micro::MicrostructureParams RunConfig::micro_params() const {
    micro::MicrostructureParams mp;
    mp.test_case = test_case;
    mp.distribution = distribution;
    mp.trunc_bound = trunc_bound;
    mp.n_ellipses = n_ellipses;
    mp.axis_min = axis_min;
    mp.axis_max = axis_max;
    mp.fixed_geometry = fixed_geometry;
    mp.master_seed = master_seed;
    return mp;
}

void RunConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw ConfigError("epsilon: must lie in (0, 1]");
    const double inv_eps = 1.0 / epsilon;
    if (std::fabs(inv_eps - std::lround(inv_eps)) > 1e-9 * inv_eps)
        throw ConfigError("epsilon: 1/epsilon must be an integer so unit cells tile the domain");
    if (M < 1) throw ConfigError("M: must be a positive integer");
    if (cells_per_side() % M != 0)
        throw ConfigError("M: M*epsilon must divide 1 (1/epsilon=" +
                          std::to_string(cells_per_side()) + " is not a multiple of M=" +
                          std::to_string(M) + ")");
    const int blocks = blocks_per_side();
    if (n1 % blocks != 0)
        throw ConfigError(
            "epsilon/h1: block boundaries of width M*epsilon do not align with the h1 mesh "
            "(n1=" + std::to_string(n1) + " must be divisible by 1/(M*epsilon)=" +
            std::to_string(blocks) + ")");
    if (cell_subdivisions() < 2) throw ConfigError("h: need at least 2 subdivisions per unit");
    if (n0 < 2) throw ConfigError("h0: need at least 2 subdivisions");
    if (n1 < 2) throw ConfigError("h1: need at least 2 subdivisions");
    if (degree != 1) throw ConfigError("r: only degree-1 elements are supported");
    if (quadrature_order < 1 || quadrature_order > 2)
        throw ConfigError("quadrature_order: must be 1 or 2");
    if (L < 1) throw ConfigError("L: sample count must be positive");
    if (N < 1) throw ConfigError("N: periodization size must be positive");
    if (!(trunc_bound > 0.0)) throw ConfigError("b: truncation bound must be positive");
    if (!std::isfinite(f_value)) throw ConfigError("f: source value must be finite");
    if (sample_index < 0) throw ConfigError("sample_index: must be nonnegative");
    if (n_fine < 2) throw ConfigError("n_fine: need at least 2 subdivisions");
    if (workers < 1) throw ConfigError("workers: must be positive");
    if (study.replicates < 1) throw ConfigError("replicates: must be positive");
    if (study.samples < 2) throw ConfigError("samples: perturbation study needs >= 2");
    {
        const auto mp = micro_params();
        if (mp.effective_n_ellipses() > 0 &&
            !(mp.effective_axis_min() > 0.0 &&
              mp.effective_axis_min() <= mp.effective_axis_max()))
            throw ConfigError("axis_min/axis_max: invalid ellipse axis range");
    }
}

MeshPtr make_domain_mesh(int n) {
    return std::make_shared<const mesh::TriMesh>(
        mesh::build_structured_mesh({0.0, 0.0, 1.0, 1.0}, n));
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (int i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

ModeSolver::ModeSolver(MeshPtr mesh, Mat2 mean_matrix, int quadrature_order, double cg_tol)
    : mesh_(std::move(mesh)),
      mean_(mean_matrix),
      quadrature_order_(quadrature_order),
      cg_tol_(cg_tol) {
    const auto K = fem::assemble_stiffness(
        *mesh_, [this](Vec2) { return mean_; }, quadrature_order_);
    const std::vector<double> zero(mesh_->node_count(), 0.0);
    system_ = fem::apply_dirichlet_zero(K, zero, *mesh_);
}

fem::SolutionField ModeSolver::solve_mode0(double f_value) const {
    const auto F = fem::assemble_load(
        *mesh_, [f_value](Vec2) { return f_value; }, quadrature_order_);
    const auto F_red = reduce_load(system_.dof_map, F);
    auto [x, report] = linalg::cg_solve(system_.stiffness, F_red, cg_tol_);
    if (!report.converged)
        throw SolverError("mode-0 solve did not converge (residual " +
                          fmt(report.final_residual_norm) + ")");
    fem::SolutionField field;
    field.mesh = mesh_.get();
    field.values = system_.dof_map.expand(x);
    field.role = fem::FieldRole::first_mode;
    return field;
}

fem::SolutionField ModeSolver::next_mode(const fem::SolutionField& prev_mode,
                                         const std::function<Mat2(Vec2)>& a1_field,
                                         int n) const {
    if (prev_mode.mesh != mesh_.get())
        throw ConfigError("next_mode: previous mode lives on a different mesh");
    const fem::TriQuadrature q = fem::TriQuadrature::order(quadrature_order_);

    // (E grad u_n, grad v) = -(A1 grad u_{n-1}, grad v)
    std::vector<double> b(mesh_->node_count(), 0.0);
    for (int t = 0; t < mesh_->tri_count(); ++t) {
        const auto& tri = mesh_->triangles[t];
        const Vec2 v0 = mesh_->nodes[tri[0]], v1 = mesh_->nodes[tri[1]],
                   v2 = mesh_->nodes[tri[2]];
        const double area = mesh_->tri_area(t);
        const Vec2 grad_prev = mesh::tri_gradient(*mesh_, prev_mode.values, t);
        const double inv2A = 1.0 / (2.0 * area);
        const Vec2 g[3] = {{(v1.y - v2.y) * inv2A, (v2.x - v1.x) * inv2A},
                           {(v2.y - v0.y) * inv2A, (v0.x - v2.x) * inv2A},
                           {(v0.y - v1.y) * inv2A, (v1.x - v0.x) * inv2A}};
        for (std::size_t qi = 0; qi < q.weights.size(); ++qi) {
            const auto& l = q.bary[qi];
            const Vec2 x = v0 * l[0] + v1 * l[1] + v2 * l[2];
            const Vec2 flux = a1_field(x).apply(grad_prev);
            const double w = q.weights[qi] * area;
            for (int k = 0; k < 3; ++k) b[tri[k]] -= w * flux.dot(g[k]);
        }
    }

    const auto b_red = reduce_load(system_.dof_map, b);
    auto [x, report] = linalg::cg_solve(system_.stiffness, b_red, cg_tol_);
    if (!report.converged)
        throw SolverError("mode-" + std::to_string(n) + " solve did not converge");
    fem::SolutionField field;
    field.mesh = mesh_.get();
    field.values = system_.dof_map.expand(x);
    field.role = fem::FieldRole::mode_n;
    field.mode_index = n;
    return field;
}

fem::SolutionField mmc_mode_n(int n, const ModeSolver& solver,
                              const fem::SolutionField& prev_mode,
                              const homog::PerturbationDecomposition& decomposition) {
    if (n < 1) throw ConfigError("mmc_mode_n: mode index must be >= 1");
    const double block_width = std::sqrt(decomposition.block_area);
    auto a1 = [&decomposition, block_width](Vec2 x) -> Mat2 {
        if (decomposition.degenerate) return Mat2{};
        const int i = static_cast<int>(std::floor(x.x / block_width));
        const int j = static_cast<int>(std::floor(x.y / block_width));
        const auto it = decomposition.a1_blocks.find({i, j});
        if (it == decomposition.a1_blocks.end())
            throw ConfigError("mmc_mode_n: point outside the decomposed block grid");
        return it->second;
    };
    return solver.next_mode(prev_mode, a1, n);
}

TwoStageResult algorithm1_two_stage(const RunConfig& config, bool with_decomposition) {
    config.validate();
    const auto mp = config.micro_params();
    const auto cell = make_cell_mesh(config.M, config.cell_subdivisions());

    TwoStageResult result;
    result.sample_tensors.resize(config.L);
    parallel_for(config.L, config.workers, [&](int s) {
        result.sample_tensors[s] = cell_tensor(config, mp, *cell, s, 0, 0);
    });

    result.stats = (config.L >= 2)
                       ? homog::empirical_stats(result.sample_tensors)
                       : homog::EmpiricalStats{result.sample_tensors.front().m, Mat2{}, 1};

    if (with_decomposition && config.L >= 2) {
        const auto blocks = sample_block_tensors(config, 0);
        const double block_area = std::pow(config.epsilon * config.M, 2);
        result.decomposition = homog::kl_decompose(blocks, result.stats, block_area);
    } else {
        result.decomposition.mean_matrix = result.stats.mean;
        result.decomposition.delta = result.stats.max_std();
        result.decomposition.degenerate = result.decomposition.delta == 0.0;
        result.decomposition.block_area = std::pow(config.epsilon * config.M, 2);
    }

    result.mesh0 = make_domain_mesh(config.n0);
    const ModeSolver solver(result.mesh0, result.stats.mean, config.quadrature_order);
    result.first_mode = solver.solve_mode0(config.f_value);
    return result;
}

std::map<std::pair<int, int>, homog::EquivalentTensor> sample_block_tensors(
    const RunConfig& config, int sample_index) {
    config.validate();
    const auto mp = config.micro_params();
    const auto cell = make_cell_mesh(config.M, config.cell_subdivisions());
    const int blocks = config.blocks_per_side();

    std::vector<homog::EquivalentTensor> flat(static_cast<std::size_t>(blocks) * blocks);
    parallel_for(blocks * blocks, config.workers, [&](int idx) {
        const int k1 = idx % blocks;
        const int k2 = idx / blocks;
        flat[idx] = cell_tensor(config, mp, *cell, sample_index, config.M * k1,
                                config.M * k2);
        flat[idx].block = {k1, k2};
    });

    std::map<std::pair<int, int>, homog::EquivalentTensor> out;
    for (const auto& t : flat) out[t.block] = t;
    return out;
}

fem::SolutionField solve_equivalent_sample(
    const std::map<std::pair<int, int>, homog::EquivalentTensor>& block_tensors,
    const mesh::TriMesh& mesh_h1, double block_width, double f_value, int quadrature_order,
    double cg_tol) {
    const double width = mesh_h1.domain.width();
    const double nb_exact = width / block_width;
    const int nb = static_cast<int>(std::lround(nb_exact));
    if (std::fabs(nb_exact - nb) > 1e-9 || nb < 1)
        throw ConfigError("solve_equivalent_sample: blocks do not tile the domain");
    if (mesh_h1.nx % nb != 0 || mesh_h1.ny % nb != 0)
        throw ConfigError("solve_equivalent_sample: mesh elements straddle block boundaries "
                          "(mesh lines must contain every block boundary)");

    // Flatten the block map for O(1) lookup in the assembly hot loop.
    std::vector<Mat2> grid(static_cast<std::size_t>(nb) * nb);
    for (int j = 0; j < nb; ++j)
        for (int i = 0; i < nb; ++i) {
            const auto it = block_tensors.find({i, j});
            if (it == block_tensors.end())
                throw ConfigError("solve_equivalent_sample: missing tensor for block (" +
                                  std::to_string(i) + "," + std::to_string(j) + ")");
            grid[static_cast<std::size_t>(j) * nb + i] = it->second.m;
        }

    const Rect dom = mesh_h1.domain;
    auto coeff = [&](Vec2 x) -> Mat2 {
        int i = static_cast<int>(std::floor((x.x - dom.x0) / block_width));
        int j = static_cast<int>(std::floor((x.y - dom.y0) / block_width));
        i = std::clamp(i, 0, nb - 1);
        j = std::clamp(j, 0, nb - 1);
        return grid[static_cast<std::size_t>(j) * nb + i];
    };

    const auto K = fem::assemble_stiffness(mesh_h1, coeff, quadrature_order);
    const auto F = fem::assemble_load(
        mesh_h1, [f_value](Vec2) { return f_value; }, quadrature_order);
    const auto sys = fem::apply_dirichlet_zero(K, F, mesh_h1);
    auto [x, report] = linalg::cg_solve(sys.stiffness, sys.load, cg_tol);
    if (!report.converged)
        throw SolverError("equivalent-sample solve did not converge (residual " +
                          fmt(report.final_residual_norm) + ")");

    fem::SolutionField field;
    field.mesh = &mesh_h1;
    field.values = sys.dof_map.expand(x);
    field.role = fem::FieldRole::equivalent_sample;
    return field;
}

ReferenceResult algorithm2_reference(const RunConfig& config, bool keep_samples) {
    config.validate();
    const auto mp = config.micro_params();
    const auto cell = make_cell_mesh(config.M, config.cell_subdivisions());
    const int blocks = config.blocks_per_side();
    const double block_width = config.M * config.epsilon;

    ReferenceResult result;
    result.mesh1 = make_domain_mesh(config.n1);
    result.tensors.resize(static_cast<std::size_t>(config.L) * blocks * blocks);
    std::vector<std::vector<double>> values(config.L);

    parallel_for(config.L, config.workers, [&](int s) {
        std::map<std::pair<int, int>, homog::EquivalentTensor> block_map;
        for (int k2 = 0; k2 < blocks; ++k2) {
            for (int k1 = 0; k1 < blocks; ++k1) {
                auto t = cell_tensor(config, mp, *cell, s, config.M * k1, config.M * k2);
                t.block = {k1, k2};
                result.tensors[(static_cast<std::size_t>(s) * blocks + k2) * blocks + k1] = t;
                block_map[{k1, k2}] = std::move(t);
            }
        }
        auto field = solve_equivalent_sample(block_map, *result.mesh1, block_width,
                                             config.f_value, config.quadrature_order);
        values[s] = std::move(field.values);
    });

    // Deterministic ordered reduction over sample index.
    std::vector<double> mean(result.mesh1->node_count(), 0.0);
    for (int s = 0; s < config.L; ++s)
        for (std::size_t n = 0; n < mean.size(); ++n) mean[n] += values[s][n];
    const double inv_L = 1.0 / config.L;
    for (double& v : mean) v *= inv_L;

    result.mean_field.mesh = result.mesh1.get();
    result.mean_field.values = std::move(mean);
    result.mean_field.role = fem::FieldRole::reference_mean;
    if (keep_samples) result.sample_values = std::move(values);
    return result;
}

DirectSolveResult direct_fine_solve(const RunConfig& config, int sample_index, int n_fine) {
    config.validate();
    const int cells = config.cells_per_side();
    if (n_fine < 4 * cells)
        throw ConfigError("n_fine: " + std::to_string(n_fine) +
                          " does not resolve the microstructure; need n_fine >= 4/epsilon=" +
                          std::to_string(4 * cells) + " (16/epsilon recommended)");

    const auto mp = config.micro_params();
    auto realization = micro::make_realization(mp, sample_index, cells, cells);
    const auto field_coeff = micro::make_coefficient_field(
        mp, std::move(realization), config.epsilon, config.diagonal_only);

    DirectSolveResult result;
    result.mesh = make_domain_mesh(n_fine);
    const auto K = fem::assemble_stiffness(*result.mesh, field_coeff.domain_fn(),
                                           config.quadrature_order);
    const auto F = fem::assemble_load(
        *result.mesh, [&](Vec2) { return config.f_value; }, config.quadrature_order);
    const auto sys = fem::apply_dirichlet_zero(K, F, *result.mesh);
    auto [x, report] = linalg::cg_solve(sys.stiffness, sys.load);
    if (!report.converged)
        throw SolverError("direct fine solve did not converge (sample " +
                          std::to_string(sample_index) + ")");

    result.field.mesh = result.mesh.get();
    result.field.values = sys.dof_map.expand(x);
    result.field.role = fem::FieldRole::direct_fine;
    return result;
}

double relative_error(const fem::SolutionField& u, const fem::SolutionField& ref) {
    const double ref_norm = fem::l2_norm(ref);
    if (ref_norm == 0.0) throw ConfigError("relative_error: reference field has zero norm");
    return fem::l2_error_cross_mesh(u, ref) / ref_norm;
}

const std::vector<double>& StudyResult::observable(const std::string& name) const {
    for (const auto& [key, values] : observables)
        if (key == name) return values;
    throw ConfigError("study observable '" + name + "' not found");
}

std::string StudyResult::csv() const {
    std::ostringstream out;
    out << abscissa_name;
    for (const auto& [key, values] : observables) out << "," << key;
    out << "\n";
    for (std::size_t r = 0; r < abscissa.size(); ++r) {
        out << fmt(abscissa[r]);
        for (const auto& [key, values] : observables) out << "," << fmt(values[r]);
        out << "\n";
    }
    return out.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                    double* intercept) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("loglog_slope: need at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw ConfigError("loglog_slope: nonpositive data");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(x.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (intercept) *intercept = (sy - slope * sx) / n;
    return slope;
}

StudyResult variance_decay_study(const RunConfig& config, const std::vector<int>& M_list) {
    config.validate();
    if (M_list.size() < 2)
        throw ConfigError("M_list: variance decay study needs at least two cell sizes");
    if (!std::is_sorted(M_list.begin(), M_list.end()) ||
        std::adjacent_find(M_list.begin(), M_list.end()) != M_list.end())
        throw ConfigError("M_list: must be strictly increasing");

    const auto mp = config.micro_params();
    StudyResult result;
    result.abscissa_name = "M";
    std::vector<double> var11, delta;
    for (const int m : M_list) {
        RunConfig local = config;
        local.M = m;
        const auto cell = make_cell_mesh(m, config.cell_subdivisions());
        std::vector<homog::EquivalentTensor> tensors(config.L);
        parallel_for(config.L, config.workers, [&](int s) {
            tensors[s] = cell_tensor(local, mp, *cell, s, 0, 0);
        });
        const auto stats = homog::empirical_stats(tensors);
        result.abscissa.push_back(m);
        var11.push_back(stats.variance.a11);
        delta.push_back(stats.max_std());
    }
    result.observables.emplace_back("var_a11", var11);
    result.observables.emplace_back("delta", delta);

    result.degenerate =
        std::any_of(var11.begin(), var11.end(), [](double v) { return v <= 0.0; });
    if (!result.degenerate)
        result.slope = loglog_slope(result.abscissa, var11, &result.intercept);
    return result;
}

StudyResult delta_scaling_study(const RunConfig& config, const std::vector<double>& scale_list) {
    config.validate();
    if (scale_list.size() < 2) throw ConfigError("scale_list: need at least two scales");
    for (double s : scale_list)
        if (!(s > 0.0 && s <= 1.0)) throw ConfigError("scale_list: scales must lie in (0, 1]");
    if (!std::is_sorted(scale_list.begin(), scale_list.end()))
        throw ConfigError("scale_list: must be increasing");

    const int n_samples = config.study.samples;
    const int blocks = config.blocks_per_side();
    const double block_width = config.M * config.epsilon;
    const double block_area = block_width * block_width;

    // One set of per-sample block decompositions, reused across scales.
    std::vector<std::map<std::pair<int, int>, homog::EquivalentTensor>> sample_blocks(n_samples);
    for (int s = 0; s < n_samples; ++s) sample_blocks[s] = sample_block_tensors(config, s);

    std::vector<homog::EquivalentTensor> pooled;
    pooled.reserve(static_cast<std::size_t>(n_samples) * blocks * blocks);
    for (const auto& m : sample_blocks)
        for (const auto& [k, t] : m) pooled.push_back(t);
    const auto stats = homog::empirical_stats(pooled);
    if (stats.max_std() == 0.0)
        throw ConfigError("delta_scaling_study: degenerate (deterministic) decomposition");

    std::vector<homog::PerturbationDecomposition> decs(n_samples);
    for (int s = 0; s < n_samples; ++s)
        decs[s] = homog::kl_decompose(sample_blocks[s], stats, block_area);

    const auto mesh1 = make_domain_mesh(config.n1);
    const ModeSolver solver(mesh1, stats.mean, config.quadrature_order);
    const auto u0 = solver.solve_mode0(config.f_value);

    StudyResult result;
    result.abscissa_name = "scale";
    std::vector<double> mean_err2(scale_list.size(), 0.0);
    for (std::size_t si = 0; si < scale_list.size(); ++si) {
        const double s = scale_list[si];
        std::vector<double> err2(n_samples, 0.0);
        parallel_for(n_samples, config.workers, [&](int sigma) {
            std::map<std::pair<int, int>, homog::EquivalentTensor> scaled;
            for (const auto& [k, a1] : decs[sigma].a1_blocks) {
                homog::EquivalentTensor t;
                t.m = stats.mean + a1 * (s * decs[sigma].delta);
                scaled[k] = t;
            }
            auto u_hat = solve_equivalent_sample(scaled, *mesh1, block_width, config.f_value,
                                                 config.quadrature_order);
            fem::SolutionField diff = u_hat;
            for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= u0.values[i];
            const double h1 = fem::h1_norm(diff);
            err2[sigma] = h1 * h1;
        });
        for (double e : err2) mean_err2[si] += e;
        mean_err2[si] /= n_samples;
        result.abscissa.push_back(s);
    }
    result.observables.emplace_back("mean_sq_h1_error", mean_err2);
    result.slope = loglog_slope(result.abscissa, mean_err2, &result.intercept);
    return result;
}

StudyResult sample_count_study(const RunConfig& config, const std::vector<int>& L_list) {
    config.validate();
    if (L_list.empty()) throw ConfigError("L_list: must not be empty");
    if (!std::is_sorted(L_list.begin(), L_list.end()) ||
        std::adjacent_find(L_list.begin(), L_list.end()) != L_list.end())
        throw ConfigError("L_list: must be strictly increasing");
    const int replicates = config.study.replicates;
    if (replicates < 2) throw ConfigError("replicates: variance of mu_L needs >= 2");

    const auto mp = config.micro_params();
    const auto cell = make_cell_mesh(config.M, config.cell_subdivisions());
    const int L_max = L_list.back();
    const int total = replicates * L_max;

    std::vector<double> a11(total, 0.0);
    parallel_for(total, config.workers, [&](int idx) {
        a11[idx] = cell_tensor(config, mp, *cell, idx, 0, 0).m.a11;
    });

    StudyResult result;
    result.abscissa_name = "L";
    std::vector<double> var_mu, mean_mu, n_est;
    for (const int L : L_list) {
        // Disjoint chunk means pooled across replicates.
        std::vector<double> means;
        for (int r = 0; r < replicates; ++r) {
            for (int c = 0; c + L <= L_max; c += L) {
                double m = 0.0;
                for (int i = 0; i < L; ++i) m += a11[r * L_max + c + i];
                means.push_back(m / L);
            }
        }
        double mean = 0.0;
        for (double m : means) mean += m;
        mean /= static_cast<double>(means.size());
        double var = 0.0;
        for (double m : means) var += (m - mean) * (m - mean);
        var /= static_cast<double>(means.size() - 1);
        result.abscissa.push_back(L);
        var_mu.push_back(var);
        mean_mu.push_back(mean);
        n_est.push_back(static_cast<double>(means.size()));
    }
    result.observables.emplace_back("var_mu11", var_mu);
    result.observables.emplace_back("mean_mu11", mean_mu);
    result.observables.emplace_back("estimates", n_est);
    result.degenerate =
        std::any_of(var_mu.begin(), var_mu.end(), [](double v) { return v <= 0.0; });
    if (!result.degenerate)
        result.slope = loglog_slope(result.abscissa, var_mu, &result.intercept);
    return result;
}

StudyResult periodization_comparison_study(const RunConfig& config,
                                           const std::vector<int>& N_list) {
    config.validate();
    if (N_list.empty()) throw ConfigError("N_list: must not be empty");
    if (!std::is_sorted(N_list.begin(), N_list.end()))
        throw ConfigError("N_list: must be increasing");
    const int replicates = config.study.replicates;
    const auto mp = config.micro_params();
    const int n_per_unit = config.cell_subdivisions();

    StudyResult result;
    result.abscissa_name = "L";
    std::vector<double> mu11, astar11, err, err_se;

    for (const int N : N_list) {
        std::vector<double> errors(replicates), mus(replicates), astars(replicates);
        for (int r = 0; r < replicates; ++r) {
            // One grid of draws feeds both sides of the comparison.
            auto grid = micro::make_realization(mp, r, N, N);
            const auto field = micro::make_coefficient_field(mp, grid, config.epsilon,
                                                             config.diagonal_only);
            const auto big_mesh = make_cell_mesh(N, n_per_unit);
            homog::CellProblemSetup setup;
            setup.mesh = big_mesh.get();
            setup.coefficient = field.cell_fn();
            setup.quadrature_order = config.quadrature_order;
            const auto astar =
                homog::periodization_matrix(setup, N, field.alpha, field.beta);

            const auto unit_mesh = make_cell_mesh(1, n_per_unit);
            std::vector<double> cell_a11(static_cast<std::size_t>(N) * N, 0.0);
            parallel_for(N * N, config.workers, [&](int idx) {
                const int i = idx % N;
                const int j = idx / N;
                micro::SampleRealization single;
                single.sample_index = r;
                single.nx = single.ny = 1;
                single.shared_geometry = true;
                single.geometry = {grid.geometry_at(i, j)};
                single.z = {grid.z_at(i, j)};
                const auto f1 = micro::make_coefficient_field(mp, std::move(single),
                                                              config.epsilon,
                                                              config.diagonal_only);
                homog::CellProblemSetup s1;
                s1.mesh = unit_mesh.get();
                s1.coefficient = f1.cell_fn();
                s1.quadrature_order = config.quadrature_order;
                cell_a11[idx] = homog::compute_equivalent(s1, f1.alpha, f1.beta).m.a11;
            });
            double mu = 0.0;
            for (double v : cell_a11) mu += v;
            mu /= static_cast<double>(cell_a11.size());

            mus[r] = mu;
            astars[r] = astar.m.a11;
            errors[r] = std::fabs(mu - astar.m.a11) / astar.m.a11;
        }
        double mean_err = 0.0, mean_mu = 0.0, mean_astar = 0.0;
        for (int r = 0; r < replicates; ++r) {
            mean_err += errors[r];
            mean_mu += mus[r];
            mean_astar += astars[r];
        }
        mean_err /= replicates;
        mean_mu /= replicates;
        mean_astar /= replicates;
        double se = 0.0;
        if (replicates > 1) {
            for (int r = 0; r < replicates; ++r)
                se += (errors[r] - mean_err) * (errors[r] - mean_err);
            se = std::sqrt(se / (replicates - 1) / replicates);
        }
        result.abscissa.push_back(static_cast<double>(N) * N);
        mu11.push_back(mean_mu);
        astar11.push_back(mean_astar);
        err.push_back(mean_err);
        err_se.push_back(se);
    }
    result.observables.emplace_back("mu11", mu11);
    result.observables.emplace_back("astar11", astar11);
    result.observables.emplace_back("error", err);
    result.observables.emplace_back("error_se", err_se);
    return result;
}

}  // namespace stochhom::pipeline
