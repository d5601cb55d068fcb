#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stochhom/types.hpp"

namespace stochhom::mesh {

enum class BoundaryTag : std::uint8_t { interior, left, right, bottom, top, corner };

/// Structured triangulation of an axis-aligned rectangle. Every grid square is
/// split along the lower-left to upper-right diagonal, node ordering row-major.
/// Immutable after construction.
struct TriMesh {
    Rect domain;
    int nx = 0;  // grid cells along x
    int ny = 0;  // grid cells along y
    double hx = 0.0, hy = 0.0;
    double h = 0.0;  // nominal mesh size, 1/n for n subdivisions per unit
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;  // counterclockwise
    std::vector<BoundaryTag> boundary_tag;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int tri_count() const { return static_cast<int>(triangles.size()); }
    int node_index(int i, int j) const { return j * (nx + 1) + i; }
    double tri_area(int t) const;
};

/// Identification of opposite-boundary nodes for periodic problems.
/// Right/top nodes map onto left/bottom masters; all four corners collapse
/// onto one node.
struct PeriodicMap {
    std::vector<int> master_of;      // full node -> master full node
    std::vector<int> reduced_index;  // full node -> reduced index
    int n_reduced = 0;
};

/// n subdivisions per unit length; domain side lengths must be integer
/// multiples of 1/n.
TriMesh build_structured_mesh(const Rect& domain, int n);

PeriodicMap periodic_pairing(const TriMesh& mesh);

struct PointLocation {
    int triangle = -1;
    std::array<double, 3> bary{};
};

/// O(1) structured-grid lookup. p must lie in the closed domain rectangle.
PointLocation locate_point(const TriMesh& mesh, Vec2 p);

/// Piecewise-linear interpolation of nodal data; exact for affine data.
double evaluate_field(const TriMesh& mesh, const std::vector<double>& nodal_values, Vec2 p);

/// Constant gradient of the P1 interpolant on triangle t.
Vec2 tri_gradient(const TriMesh& mesh, const std::vector<double>& nodal_values, int t);

/// Legacy ASCII VTK unstructured-grid export with one point-data scalar.
void write_vtk(const TriMesh& mesh, const std::vector<double>& nodal_values,
               const std::string& scalar_name, const std::string& path);

}  // namespace stochhom::mesh
