#include "stochhom/homogenize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace stochhom::homog {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

std::vector<double> CellSolution::full_values() const {
    std::vector<double> full(mesh->node_count());
    for (int n = 0; n < mesh->node_count(); ++n)
        full[n] = reduced_values[periodic.reduced_index[n]];
    return full;
}

namespace {

// Torus-reduced operator shared by the two directional solves.
struct ReducedCell {
    mesh::PeriodicMap periodic;
    linalg::SparseMatrix stiffness;
    std::vector<double> weights;  // lumped mass on reduced dofs
};

ReducedCell reduce_cell(const CellProblemSetup& setup) {
    ReducedCell rc;
    rc.periodic = mesh::periodic_pairing(*setup.mesh);
    const auto K = fem::assemble_stiffness(*setup.mesh, setup.coefficient,
                                           setup.quadrature_order);
    const std::vector<double> zero(setup.mesh->node_count(), 0.0);
    rc.stiffness = fem::apply_periodic(K, zero, rc.periodic).stiffness;

    rc.weights.assign(rc.periodic.n_reduced, 0.0);
    const auto lumped = fem::assemble_lumped_mass(*setup.mesh);
    for (int n = 0; n < setup.mesh->node_count(); ++n)
        rc.weights[rc.periodic.reduced_index[n]] += lumped[n];
    return rc;
}

CellSolution solve_direction(const CellProblemSetup& setup, const ReducedCell& rc,
                             fem::Direction direction) {
    const auto b = fem::assemble_cell_rhs(*setup.mesh, setup.coefficient, direction,
                                          setup.quadrature_order);
    std::vector<double> b_red(rc.periodic.n_reduced, 0.0);
    for (int n = 0; n < setup.mesh->node_count(); ++n)
        b_red[rc.periodic.reduced_index[n]] += b[n];

    auto [x, report] =
        linalg::cg_solve_meanzero(rc.stiffness, b_red, rc.weights, setup.cg_tol);
    if (!report.converged)
        throw SolverError("cell problem CG did not converge (direction " +
                          std::string(direction == fem::Direction::e1 ? "e1" : "e2") +
                          ", residual " + fmt(report.final_residual_norm) + ")");

    CellSolution sol;
    sol.mesh = setup.mesh;
    sol.direction = direction;
    sol.periodic = rc.periodic;
    sol.reduced_values = std::move(x);
    sol.report = report;
    return sol;
}

}  // namespace

CellSolution solve_cell_problem(const CellProblemSetup& setup, fem::Direction direction) {
    const ReducedCell rc = reduce_cell(setup);
    return solve_direction(setup, rc, direction);
}

EquivalentTensor equivalent_matrix(const CellSolution& cell_e1, const CellSolution& cell_e2,
                                   const CellProblemSetup& setup, double alpha, double beta) {
    if (cell_e1.mesh != cell_e2.mesh)
        throw ConfigError("equivalent_matrix: cell solutions on different meshes");
    const mesh::TriMesh& m = *cell_e1.mesh;
    const auto full1 = cell_e1.full_values();
    const auto full2 = cell_e2.full_values();
    const fem::TriQuadrature q = fem::TriQuadrature::order(setup.quadrature_order);

    double a11 = 0.0, a22 = 0.0, a12 = 0.0, a21 = 0.0;
    for (int t = 0; t < m.tri_count(); ++t) {
        const auto& tri = m.triangles[t];
        const Vec2 v0 = m.nodes[tri[0]], v1 = m.nodes[tri[1]], v2 = m.nodes[tri[2]];
        const double area = m.tri_area(t);
        const Vec2 g1 = mesh::tri_gradient(m, full1, t);
        const Vec2 g2 = mesh::tri_gradient(m, full2, t);
        const Vec2 d1{1.0 + g1.x, g1.y};  // e1 + grad N_1
        const Vec2 d2{g2.x, 1.0 + g2.y};  // e2 + grad N_2
        for (std::size_t qi = 0; qi < q.weights.size(); ++qi) {
            const auto& l = q.bary[qi];
            const Vec2 x = v0 * l[0] + v1 * l[1] + v2 * l[2];
            const Mat2 a = setup.coefficient(x);
            const double w = q.weights[qi] * area;
            const Vec2 f1 = a.apply(d1);
            const Vec2 f2 = a.apply(d2);
            a11 += w * d1.dot(f1);
            a22 += w * d2.dot(f2);
            a12 += w * d1.dot(f2);
            a21 += w * d2.dot(f1);
        }
    }

    const double inv_area = 1.0 / m.domain.area();
    Mat2 result{a11 * inv_area, a12 * inv_area, a21 * inv_area, a22 * inv_area};

    const double scale = std::max(1.0, result.max_abs());
    if (std::fabs(result.a12 - result.a21) > 1e-8 * scale)
        throw SolverError("equivalent_matrix: asymmetry beyond tolerance (" +
                          fmt(result.a12 - result.a21) + ")");
    const double sym_off = 0.5 * (result.a12 + result.a21);
    result.a12 = result.a21 = sym_off;

    if (beta > alpha) {
        const auto ev = result.sym_eigenvalues();
        const double slack = 1e-6 * std::max(1.0, beta);
        if (ev[0] < alpha - slack || ev[1] > beta + slack)
            throw SolverError("equivalent_matrix: eigenvalues escape the ellipticity interval [" +
                              fmt(alpha) + ", " + fmt(beta) + "]");
    }

    EquivalentTensor tensor;
    tensor.m = result;
    tensor.role = TensorRole::block_equivalent;
    tensor.cg_iterations = cell_e1.report.iterations + cell_e2.report.iterations;
    return tensor;
}

EquivalentTensor compute_equivalent(const CellProblemSetup& setup, double alpha, double beta) {
    const ReducedCell rc = reduce_cell(setup);
    const CellSolution c1 = solve_direction(setup, rc, fem::Direction::e1);
    const CellSolution c2 = solve_direction(setup, rc, fem::Direction::e2);
    return equivalent_matrix(c1, c2, setup, alpha, beta);
}

EquivalentTensor periodization_matrix(const CellProblemSetup& setup, int n_cells,
                                      double alpha, double beta) {
    EquivalentTensor tensor = compute_equivalent(setup, alpha, beta);
    tensor.role = TensorRole::periodization;
    tensor.periodization_size = n_cells;
    return tensor;
}

double EmpiricalStats::max_std() const {
    const Mat2& v = variance;
    const double vmax = std::max(std::max(v.a11, v.a12), std::max(v.a21, v.a22));
    return std::sqrt(std::max(0.0, vmax));
}

EmpiricalStats empirical_stats(const std::vector<EquivalentTensor>& tensors) {
    if (tensors.size() < 2)
        throw ConfigError("empirical_stats: need at least two samples for a variance");
    for (const auto& t : tensors)
        if (t.role != tensors.front().role)
            throw ConfigError("empirical_stats: mixed tensor roles");

    Mat2 mean, m2;
    int count = 0;
    for (const auto& t : tensors) {
        ++count;
        const Mat2 d = t.m - mean;
        mean = mean + d * (1.0 / count);
        const Mat2 d2 = t.m - mean;
        m2 = m2 + Mat2{d.a11 * d2.a11, d.a12 * d2.a12, d.a21 * d2.a21, d.a22 * d2.a22};
    }
    EmpiricalStats stats;
    stats.mean = mean;
    stats.variance = m2 * (1.0 / (count - 1));
    stats.sample_count = count;
    return stats;
}

double PerturbationDecomposition::lambda1(int i, int j, const EmpiricalStats& stats) const {
    const double var = (i == 1 && j == 1)   ? stats.variance.a11
                       : (i == 1 && j == 2) ? stats.variance.a12
                       : (i == 2 && j == 1) ? stats.variance.a21
                                            : stats.variance.a22;
    return block_area * var;
}

double PerturbationDecomposition::phi1() const { return 1.0 / std::sqrt(block_area); }

Mat2 PerturbationDecomposition::reconstruct(std::pair<int, int> block) const {
    const auto it = a1_blocks.find(block);
    if (it == a1_blocks.end()) throw ConfigError("reconstruct: unknown block index");
    return mean_matrix + it->second * delta;
}

PerturbationDecomposition kl_decompose(
    const std::map<std::pair<int, int>, EquivalentTensor>& block_tensors,
    const EmpiricalStats& stats, double block_area) {
    if (stats.sample_count < 2)
        throw ConfigError("kl_decompose: statistics need at least two samples");

    PerturbationDecomposition d;
    d.mean_matrix = stats.mean;
    d.delta = stats.max_std();
    d.block_area = block_area;

    const double std11 = std::sqrt(std::max(0.0, stats.variance.a11));
    if (d.delta == 0.0) {
        d.degenerate = true;
        for (const auto& [k, t] : block_tensors) {
            d.a1_blocks[k] = Mat2{};
            d.z1[k] = 0.0;
        }
        return d;
    }

    const double inv_delta = 1.0 / d.delta;
    for (const auto& [k, t] : block_tensors) {
        d.a1_blocks[k] = (t.m - stats.mean) * inv_delta;
        d.z1[k] = std11 > 0.0 ? (t.m.a11 - stats.mean.a11) / std11 : 0.0;
    }
    return d;
}

double covariance_two_phase(double a1, double a2, Region region_s, Region region_t) {
    const double vs = region_s == Region::d1 ? a1 : a2;
    const double vt = region_t == Region::d1 ? a1 : a2;
    return vs * vt / 12.0;
}

void write_tensor_csv(const std::vector<EquivalentTensor>& tensors, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_tensor_csv: cannot open " + path);
    out << "sample_index,block_k1,block_k2,a11,a12,a21,a22,cg_iterations\n";
    for (const auto& t : tensors) {
        out << (t.sample_index ? *t.sample_index : 0) << "," << t.block.first << ","
            << t.block.second << "," << fmt(t.m.a11) << "," << fmt(t.m.a12) << ","
            << fmt(t.m.a21) << "," << fmt(t.m.a22) << "," << t.cg_iterations << "\n";
    }
    if (!out) throw IoError("write_tensor_csv: write failed for " + path);
}

}  // namespace stochhom::homog
