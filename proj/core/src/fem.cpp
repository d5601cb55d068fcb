#include "stochhom/fem.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stochhom::fem {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

struct TriGeom {
    std::array<int, 3> nodes;
    std::array<Vec2, 3> v;
    std::array<Vec2, 3> grad;  // P1 basis gradients, constant on the triangle
    double area;
};

TriGeom tri_geometry(const mesh::TriMesh& m, int t) {
    TriGeom g;
    g.nodes = m.triangles[t];
    for (int k = 0; k < 3; ++k) g.v[k] = m.nodes[g.nodes[k]];
    g.area = m.tri_area(t);
    const double inv2A = 1.0 / (2.0 * g.area);
    g.grad[0] = {(g.v[1].y - g.v[2].y) * inv2A, (g.v[2].x - g.v[1].x) * inv2A};
    g.grad[1] = {(g.v[2].y - g.v[0].y) * inv2A, (g.v[0].x - g.v[2].x) * inv2A};
    g.grad[2] = {(g.v[0].y - g.v[1].y) * inv2A, (g.v[1].x - g.v[0].x) * inv2A};
    return g;
}

Vec2 quad_point(const TriGeom& g, const std::array<double, 3>& bary) {
    return g.v[0] * bary[0] + g.v[1] * bary[1] + g.v[2] * bary[2];
}

Mat2 sample_coefficient(const MatFn& coeff, Vec2 x) {
    const Mat2 a = coeff(x);
    if (!a.symmetric(1e-10))
        throw ConfigError("assemble: nonsymmetric coefficient sample at (" +
                          fmt(x.x) + ", " + fmt(x.y) + ")");
    return a;
}

}  // namespace

TriQuadrature TriQuadrature::order(int o) {
    TriQuadrature q;
    if (o <= 1) {
        q.bary = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
        q.weights = {1.0};
    } else if (o == 2) {
        q.bary = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                  {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                  {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};
        q.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    } else {
        throw ConfigError("quadrature_order must be 1 or 2");
    }
    return q;
}

std::vector<double> DofMap::expand(const std::vector<double>& reduced) const {
    std::vector<double> full(node_to_dof.size(), 0.0);
    for (std::size_t n = 0; n < node_to_dof.size(); ++n)
        if (node_to_dof[n] >= 0) full[n] = reduced[node_to_dof[n]];
    return full;
}

linalg::SparseMatrix assemble_stiffness(const mesh::TriMesh& m, const MatFn& coeff,
                                        int quadrature_order) {
    const TriQuadrature q = TriQuadrature::order(quadrature_order);
    linalg::CooBuilder coo(m.node_count(), m.node_count());
    for (int t = 0; t < m.tri_count(); ++t) {
        const TriGeom g = tri_geometry(m, t);
        double ke[3][3] = {};
        for (std::size_t qi = 0; qi < q.weights.size(); ++qi) {
            const Mat2 a = sample_coefficient(coeff, quad_point(g, q.bary[qi]));
            const double w = q.weights[qi] * g.area;
            Vec2 agrad[3];
            for (int k = 0; k < 3; ++k) agrad[k] = a.apply(g.grad[k]);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) ke[r][c] += w * agrad[c].dot(g.grad[r]);
        }
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) coo.add(g.nodes[r], g.nodes[c], ke[r][c]);
    }
    return coo.build();
}

std::vector<double> assemble_load(const mesh::TriMesh& m, const ScalarFn& f,
                                  int quadrature_order) {
    const TriQuadrature q = TriQuadrature::order(quadrature_order);
    std::vector<double> F(m.node_count(), 0.0);
    for (int t = 0; t < m.tri_count(); ++t) {
        const TriGeom g = tri_geometry(m, t);
        for (std::size_t qi = 0; qi < q.weights.size(); ++qi) {
            const double fv = f(quad_point(g, q.bary[qi]));
            const double w = q.weights[qi] * g.area;
            for (int k = 0; k < 3; ++k) F[g.nodes[k]] += w * fv * q.bary[qi][k];
        }
    }
    return F;
}

std::vector<double> assemble_cell_rhs(const mesh::TriMesh& m, const MatFn& coeff,
                                      Direction direction, int quadrature_order) {
    const TriQuadrature q = TriQuadrature::order(quadrature_order);
    const Vec2 e = unit_vector(direction);
    std::vector<double> b(m.node_count(), 0.0);
    for (int t = 0; t < m.tri_count(); ++t) {
        const TriGeom g = tri_geometry(m, t);
        for (std::size_t qi = 0; qi < q.weights.size(); ++qi) {
            const Mat2 a = sample_coefficient(coeff, quad_point(g, q.bary[qi]));
            const Vec2 flux = a.apply(e);
            const double w = q.weights[qi] * g.area;
            for (int k = 0; k < 3; ++k) b[g.nodes[k]] -= w * flux.dot(g.grad[k]);
        }
    }
    return b;
}

std::vector<double> assemble_lumped_mass(const mesh::TriMesh& m) {
    std::vector<double> w(m.node_count(), 0.0);
    for (int t = 0; t < m.tri_count(); ++t) {
        const double third = m.tri_area(t) / 3.0;
        for (int k = 0; k < 3; ++k) w[m.triangles[t][k]] += third;
    }
    return w;
}

AssembledSystem apply_dirichlet_zero(const linalg::SparseMatrix& K,
                                     const std::vector<double>& F, const mesh::TriMesh& m) {
    AssembledSystem sys;
    sys.dof_map.kind = DofKind::dirichlet_eliminated;
    sys.dof_map.node_to_dof.assign(m.node_count(), -1);
    int next = 0;
    for (int n = 0; n < m.node_count(); ++n)
        if (m.boundary_tag[n] == mesh::BoundaryTag::interior) sys.dof_map.node_to_dof[n] = next++;
    sys.dof_map.n_dofs = next;

    linalg::CooBuilder coo(next, next);
    for (int i = 0; i < K.n_rows; ++i) {
        const int di = sys.dof_map.node_to_dof[i];
        if (di < 0) continue;
        for (int k = K.row_offsets[i]; k < K.row_offsets[i + 1]; ++k) {
            const int dj = sys.dof_map.node_to_dof[K.col_indices[k]];
            if (dj >= 0) coo.add(di, dj, K.values[k]);
        }
    }
    sys.stiffness = coo.build();
    sys.load.assign(next, 0.0);
    for (int n = 0; n < m.node_count(); ++n)
        if (sys.dof_map.node_to_dof[n] >= 0) sys.load[sys.dof_map.node_to_dof[n]] = F[n];
    return sys;
}

AssembledSystem apply_periodic(const linalg::SparseMatrix& K, const std::vector<double>& F,
                               const mesh::PeriodicMap& map) {
    AssembledSystem sys;
    sys.dof_map.kind = DofKind::periodic_reduced;
    sys.dof_map.node_to_dof = map.reduced_index;
    sys.dof_map.n_dofs = map.n_reduced;

    linalg::CooBuilder coo(map.n_reduced, map.n_reduced);
    for (int i = 0; i < K.n_rows; ++i) {
        const int di = map.reduced_index[i];
        for (int k = K.row_offsets[i]; k < K.row_offsets[i + 1]; ++k)
            coo.add(di, map.reduced_index[K.col_indices[k]], K.values[k]);
    }
    sys.stiffness = coo.build();
    sys.load.assign(map.n_reduced, 0.0);
    for (std::size_t n = 0; n < F.size(); ++n) sys.load[map.reduced_index[n]] += F[n];
    return sys;
}

double h1_seminorm(const SolutionField& f) {
    double acc = 0.0;
    for (int t = 0; t < f.mesh->tri_count(); ++t) {
        const Vec2 g = mesh::tri_gradient(*f.mesh, f.values, t);
        acc += f.mesh->tri_area(t) * (g.x * g.x + g.y * g.y);
    }
    return std::sqrt(acc);
}

double l2_norm(const SolutionField& f) {
    // Exact P1 mass integration: int_T u^2 = |T|/6 (sum u_i^2 + sum_{i<j} u_i u_j).
    double acc = 0.0;
    for (int t = 0; t < f.mesh->tri_count(); ++t) {
        const auto& tri = f.mesh->triangles[t];
        const double u0 = f.values[tri[0]], u1 = f.values[tri[1]], u2 = f.values[tri[2]];
        acc += f.mesh->tri_area(t) / 6.0 *
               (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u0 * u2 + u1 * u2);
    }
    return std::sqrt(acc);
}

double h1_norm(const SolutionField& f) {
    const double l2 = l2_norm(f);
    const double h1 = h1_seminorm(f);
    return std::sqrt(l2 * l2 + h1 * h1);
}

double l2_error_cross_mesh(const SolutionField& a, const SolutionField& b) {
    if (!a.mesh->domain.same_as(b.mesh->domain))
        throw ConfigError("l2_error_cross_mesh: fields live on different domains");

    const bool same_mesh = (a.mesh == b.mesh) ||
                           (a.mesh->nx == b.mesh->nx && a.mesh->ny == b.mesh->ny);
    const SolutionField& fine = (a.mesh->h <= b.mesh->h) ? a : b;
    const SolutionField& coarse = (a.mesh->h <= b.mesh->h) ? b : a;

    const TriQuadrature q = TriQuadrature::order(2);
    double acc = 0.0;
    for (int t = 0; t < fine.mesh->tri_count(); ++t) {
        const auto& tri = fine.mesh->triangles[t];
        const Vec2 v0 = fine.mesh->nodes[tri[0]], v1 = fine.mesh->nodes[tri[1]],
                   v2 = fine.mesh->nodes[tri[2]];
        const double area = fine.mesh->tri_area(t);
        for (std::size_t qi = 0; qi < q.weights.size(); ++qi) {
            const auto& l = q.bary[qi];
            const Vec2 x = v0 * l[0] + v1 * l[1] + v2 * l[2];
            const double fv = l[0] * fine.values[tri[0]] + l[1] * fine.values[tri[1]] +
                              l[2] * fine.values[tri[2]];
            const double cv = same_mesh
                                  ? l[0] * coarse.values[tri[0]] + l[1] * coarse.values[tri[1]] +
                                        l[2] * coarse.values[tri[2]]
                                  : mesh::evaluate_field(*coarse.mesh, coarse.values, x);
            const double d = fv - cv;
            acc += q.weights[qi] * area * d * d;
        }
    }
    return std::sqrt(acc);
}

void write_field_csv(const SolutionField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_field_csv: cannot open " + path);
    out << "x,y,value\n";
    for (int n = 0; n < f.mesh->node_count(); ++n)
        out << fmt(f.mesh->nodes[n].x) << "," << fmt(f.mesh->nodes[n].y) << ","
            << fmt(f.values[n]) << "\n";
    if (!out) throw IoError("write_field_csv: write failed for " + path);
}

std::vector<double> read_field_csv(const mesh::TriMesh& m, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_field_csv: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> values;
    values.reserve(m.node_count());
    int n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double x, y, v;
        if (!(row >> x >> y >> v)) throw IoError("read_field_csv: malformed row in " + path);
        if (n >= m.node_count() || std::fabs(x - m.nodes[n].x) > 1e-10 ||
            std::fabs(y - m.nodes[n].y) > 1e-10)
            throw IoError("read_field_csv: node coordinates do not match the mesh");
        values.push_back(v);
        ++n;
    }
    if (n != m.node_count())
        throw IoError("read_field_csv: row count does not match the mesh");
    return values;
}

}  // namespace stochhom::fem
