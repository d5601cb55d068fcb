#include "stochhom/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace stochhom::mesh {

namespace {

int rounded_cells(double length, int n, const char* axis) {
    const double exact = length * n;
    const int cells = static_cast<int>(std::lround(exact));
    if (cells < 1 || std::fabs(exact - cells) > 1e-9)
        throw ConfigError(std::string("mesh: domain ") + axis +
                          " extent is not an integer multiple of 1/n");
    return cells;
}

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

double TriMesh::tri_area(int t) const {
    const auto& tri = triangles[t];
    const Vec2 a = nodes[tri[0]], b = nodes[tri[1]], c = nodes[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

TriMesh build_structured_mesh(const Rect& domain, int n) {
    if (n < 1) throw ConfigError("mesh: subdivisions per unit must be positive");
    if (domain.width() <= 0.0 || domain.height() <= 0.0)
        throw ConfigError("mesh: degenerate domain rectangle");

    TriMesh m;
    m.domain = domain;
    m.nx = rounded_cells(domain.width(), n, "x");
    m.ny = rounded_cells(domain.height(), n, "y");
    m.hx = domain.width() / m.nx;
    m.hy = domain.height() / m.ny;
    m.h = 1.0 / n;

    m.nodes.reserve(static_cast<std::size_t>(m.nx + 1) * (m.ny + 1));
    m.boundary_tag.reserve(m.nodes.capacity());
    for (int j = 0; j <= m.ny; ++j) {
        for (int i = 0; i <= m.nx; ++i) {
            m.nodes.push_back({domain.x0 + i * m.hx, domain.y0 + j * m.hy});
            const bool lx = (i == 0), rx = (i == m.nx), by = (j == 0), ty = (j == m.ny);
            BoundaryTag tag = BoundaryTag::interior;
            if ((lx || rx) && (by || ty)) tag = BoundaryTag::corner;
            else if (lx) tag = BoundaryTag::left;
            else if (rx) tag = BoundaryTag::right;
            else if (by) tag = BoundaryTag::bottom;
            else if (ty) tag = BoundaryTag::top;
            m.boundary_tag.push_back(tag);
        }
    }

    // Fixed diagonal (lower-left to upper-right) keeps assembly reproducible
    // and makes the (x,y) -> (y,x) swap an exact symmetry of the mesh.
    m.triangles.reserve(static_cast<std::size_t>(2) * m.nx * m.ny);
    for (int j = 0; j < m.ny; ++j) {
        for (int i = 0; i < m.nx; ++i) {
            const int a = m.node_index(i, j);
            const int b = m.node_index(i + 1, j);
            const int c = m.node_index(i + 1, j + 1);
            const int d = m.node_index(i, j + 1);
            m.triangles.push_back({a, b, c});
            m.triangles.push_back({a, c, d});
        }
    }
    return m;
}

PeriodicMap periodic_pairing(const TriMesh& mesh) {
    PeriodicMap map;
    const int n_nodes = mesh.node_count();
    map.master_of.resize(n_nodes);
    map.reduced_index.assign(n_nodes, -1);

    auto check_aligned = [&](int slave, int master, bool shift_x, bool shift_y) {
        const Vec2 s = mesh.nodes[slave];
        const Vec2 m = mesh.nodes[master];
        const double ex = std::fabs(s.x - m.x - (shift_x ? mesh.domain.width() : 0.0));
        const double ey = std::fabs(s.y - m.y - (shift_y ? mesh.domain.height() : 0.0));
        if (ex > 1e-12 || ey > 1e-12)
            throw ConfigError("periodic_pairing: opposing boundary nodes misaligned");
    };

    for (int j = 0; j <= mesh.ny; ++j) {
        for (int i = 0; i <= mesh.nx; ++i) {
            const int node = mesh.node_index(i, j);
            const int mi = (i == mesh.nx) ? 0 : i;
            const int mj = (j == mesh.ny) ? 0 : j;
            const int master = mesh.node_index(mi, mj);
            if (master != node) check_aligned(node, master, i == mesh.nx, j == mesh.ny);
            map.master_of[node] = master;
        }
    }

    int next = 0;
    for (int node = 0; node < n_nodes; ++node) {
        if (map.master_of[node] == node) map.reduced_index[node] = next++;
    }
    for (int node = 0; node < n_nodes; ++node) {
        if (map.reduced_index[node] < 0)
            map.reduced_index[node] = map.reduced_index[map.master_of[node]];
    }
    map.n_reduced = next;
    return map;
}

PointLocation locate_point(const TriMesh& mesh, Vec2 p) {
    if (!mesh.domain.contains(p, 1e-12))
        throw ConfigError("locate_point: point outside mesh domain");

    int ci = static_cast<int>(std::floor((p.x - mesh.domain.x0) / mesh.hx));
    int cj = static_cast<int>(std::floor((p.y - mesh.domain.y0) / mesh.hy));
    ci = std::clamp(ci, 0, mesh.nx - 1);
    cj = std::clamp(cj, 0, mesh.ny - 1);

    const double s = (p.x - (mesh.domain.x0 + ci * mesh.hx)) / mesh.hx;
    const double t = (p.y - (mesh.domain.y0 + cj * mesh.hy)) / mesh.hy;

    PointLocation loc;
    const int base = 2 * (cj * mesh.nx + ci);
    if (s >= t) {
        // lower triangle (a, b, c): bary (1-s, s-t, t)
        loc.triangle = base;
        loc.bary = {1.0 - s, s - t, t};
    } else {
        // upper triangle (a, c, d): bary (1-t, s, t-s)
        loc.triangle = base + 1;
        loc.bary = {1.0 - t, s, t - s};
    }
    for (double& l : loc.bary) l = std::clamp(l, 0.0, 1.0);
    const double sum = loc.bary[0] + loc.bary[1] + loc.bary[2];
    for (double& l : loc.bary) l /= sum;
    return loc;
}

double evaluate_field(const TriMesh& mesh, const std::vector<double>& nodal_values, Vec2 p) {
    if (nodal_values.size() != mesh.nodes.size())
        throw ConfigError("evaluate_field: nodal value count mismatch");
    const PointLocation loc = locate_point(mesh, p);
    const auto& tri = mesh.triangles[loc.triangle];
    return loc.bary[0] * nodal_values[tri[0]] + loc.bary[1] * nodal_values[tri[1]] +
           loc.bary[2] * nodal_values[tri[2]];
}

Vec2 tri_gradient(const TriMesh& mesh, const std::vector<double>& nodal_values, int t) {
    const auto& tri = mesh.triangles[t];
    const Vec2 a = mesh.nodes[tri[0]], b = mesh.nodes[tri[1]], c = mesh.nodes[tri[2]];
    const double inv2A = 1.0 / (2.0 * mesh.tri_area(t));
    // grad phi_0 = (b.y - c.y, c.x - b.x)/2A, cyclic
    const Vec2 g0{(b.y - c.y) * inv2A, (c.x - b.x) * inv2A};
    const Vec2 g1{(c.y - a.y) * inv2A, (a.x - c.x) * inv2A};
    const Vec2 g2{(a.y - b.y) * inv2A, (b.x - a.x) * inv2A};
    const double v0 = nodal_values[tri[0]], v1 = nodal_values[tri[1]], v2 = nodal_values[tri[2]];
    return {g0.x * v0 + g1.x * v1 + g2.x * v2, g0.y * v0 + g1.y * v1 + g2.y * v2};
}

void write_vtk(const TriMesh& mesh, const std::vector<double>& nodal_values,
               const std::string& scalar_name, const std::string& path) {
    if (nodal_values.size() != mesh.nodes.size())
        throw IoError("write_vtk: nodal value count mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("write_vtk: cannot open " + path);
    out << "# vtk DataFile Version 3.0\n";
    out << scalar_name << "\n";
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.node_count() << " double\n";
    for (const Vec2& p : mesh.nodes) out << fmt(p.x) << " " << fmt(p.y) << " 0\n";
    out << "CELLS " << mesh.tri_count() << " " << 4 * mesh.tri_count() << "\n";
    for (const auto& tri : mesh.triangles)
        out << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
    out << "CELL_TYPES " << mesh.tri_count() << "\n";
    for (int t = 0; t < mesh.tri_count(); ++t) out << "5\n";
    out << "POINT_DATA " << mesh.node_count() << "\n";
    out << "SCALARS " << scalar_name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : nodal_values) out << fmt(v) << "\n";
    if (!out) throw IoError("write_vtk: write failed for " + path);
}

}  // namespace stochhom::mesh
