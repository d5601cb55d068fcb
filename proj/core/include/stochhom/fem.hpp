#pragma once

#include <array>
#include <functional>
#include <vector>

#include "stochhom/linalg.hpp"
#include "stochhom/mesh.hpp"
#include "stochhom/types.hpp"

namespace stochhom::fem {

using MatFn = std::function<Mat2(Vec2)>;
using ScalarFn = std::function<double(Vec2)>;

enum class Direction { e1, e2 };

inline Vec2 unit_vector(Direction d) { return d == Direction::e1 ? Vec2{1, 0} : Vec2{0, 1}; }

/// Triangle quadrature in barycentric coordinates, weights summing to one.
/// Order 1 is the centroid rule; order 2 the interior 3-point rule
/// (barycentric permutations of (2/3, 1/6, 1/6)), exact for quadratics with
/// all points strictly inside the element so two-phase coefficients are
/// classified unambiguously.
struct TriQuadrature {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;

    static TriQuadrature order(int o);
};

enum class DofKind { identity, dirichlet_eliminated, periodic_reduced };

/// Node-to-dof mapping after boundary-condition application.
struct DofMap {
    DofKind kind = DofKind::identity;
    std::vector<int> node_to_dof;  // -1 for eliminated nodes
    int n_dofs = 0;

    /// Expands a reduced dof vector to full nodal values (eliminated nodes 0,
    /// periodic slaves copy their master).
    std::vector<double> expand(const std::vector<double>& reduced) const;
};

struct AssembledSystem {
    linalg::SparseMatrix stiffness;
    std::vector<double> load;
    DofMap dof_map;
    int quadrature_order = 2;
};

/// K_ij = sum_T sum_q w_q |T| (A(x_q) grad phi_j) . grad phi_i.
/// Rejects coefficient samples that are nonsymmetric beyond 1e-10.
linalg::SparseMatrix assemble_stiffness(const mesh::TriMesh& m, const MatFn& coeff,
                                        int quadrature_order = 2);

/// F_i = sum_T sum_q w_q |T| f(x_q) phi_i(x_q).
std::vector<double> assemble_load(const mesh::TriMesh& m, const ScalarFn& f,
                                  int quadrature_order = 2);

/// Divergence-form load of the periodic cell problem for coordinate direction
/// e_i: b_j = -sum_T sum_q w_q |T| (A(x_q) e_i) . grad phi_j.
std::vector<double> assemble_cell_rhs(const mesh::TriMesh& m, const MatFn& coeff,
                                      Direction direction, int quadrature_order = 2);

/// Lumped P1 mass vector (row sums of the mass matrix).
std::vector<double> assemble_lumped_mass(const mesh::TriMesh& m);

/// Eliminates boundary rows/columns (homogeneous Dirichlet data).
AssembledSystem apply_dirichlet_zero(const linalg::SparseMatrix& K,
                                     const std::vector<double>& F, const mesh::TriMesh& m);

/// Accumulates slave rows/columns onto masters; the reduced operator is
/// symmetric positive semi-definite with a one-dimensional constant nullspace.
AssembledSystem apply_periodic(const linalg::SparseMatrix& K, const std::vector<double>& F,
                               const mesh::PeriodicMap& map);

enum class FieldRole { first_mode, equivalent_sample, reference_mean, direct_fine, mode_n };

/// Nodal values of a scalar P1 function together with its provenance.
struct SolutionField {
    const mesh::TriMesh* mesh = nullptr;
    std::vector<double> values;
    FieldRole role = FieldRole::first_mode;
    int mode_index = 0;
};

double h1_seminorm(const SolutionField& f);
double l2_norm(const SolutionField& f);
double h1_norm(const SolutionField& f);

/// L2 distance of two P1 fields over the same rectangle, integrated by
/// quadrature on the finer of the two meshes.
double l2_error_cross_mesh(const SolutionField& a, const SolutionField& b);

void write_field_csv(const SolutionField& f, const std::string& path);
std::vector<double> read_field_csv(const mesh::TriMesh& m, const std::string& path);

}  // namespace stochhom::fem
