#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "stochhom/fem.hpp"
#include "stochhom/linalg.hpp"
#include "stochhom/mesh.hpp"
#include "stochhom/microstructure.hpp"
#include "stochhom/types.hpp"

namespace stochhom::homog {

/// Periodic corrector of one coordinate direction on a cell mesh, stored on
/// reduced (torus) indices with weighted mean zero.
struct CellSolution {
    const mesh::TriMesh* mesh = nullptr;
    mesh::PeriodicMap periodic;
    fem::Direction direction = fem::Direction::e1;
    std::vector<double> reduced_values;
    linalg::LinearSolveReport report;

    /// Nodal values on the full node set (slaves copy masters).
    std::vector<double> full_values() const;
};

enum class TensorRole { block_equivalent, periodization, empirical_mean, exact_reference };

/// 2x2 symmetric positive-definite effective tensor with provenance.
struct EquivalentTensor {
    Mat2 m;
    TensorRole role = TensorRole::block_equivalent;
    std::pair<int, int> block{0, 0};
    int periodization_size = 0;          // N, for role periodization
    std::optional<int> sample_index;
    int cg_iterations = 0;               // total over both directional solves
};

/// Entrywise empirical mean and unbiased variance over a tensor sample.
struct EmpiricalStats {
    Mat2 mean;
    Mat2 variance;      // per-entry, 1/(L-1) normalization
    int sample_count = 0;

    double max_std() const;  // max_ij sqrt(variance_ij)
};

/// Exact single-mode decomposition of a family of per-block tensors around the
/// empirical mean: tensor_k = mean + delta * a1_blocks[k], with delta the
/// largest entrywise standard deviation. The scaled fluctuations a1 then have
/// entrywise variance at most one, and the reconstruction is exact by
/// construction. For a spatially constant tensor per block the expansion
/// terminates after its first mode; lambda1/phi1 report the corresponding
/// eigenpair of the per-block covariance operator.
struct PerturbationDecomposition {
    Mat2 mean_matrix;
    double delta = 0.0;
    std::map<std::pair<int, int>, Mat2> a1_blocks;
    std::map<std::pair<int, int>, double> z1;  // normalized (a11 - mean11)/std11
    bool degenerate = false;                   // delta == 0 (deterministic field)
    double block_area = 0.0;                   // |eps Q_M|

    double lambda1(int i, int j, const EmpiricalStats& stats) const;
    double phi1() const;

    Mat2 reconstruct(std::pair<int, int> block) const;
};

struct CellProblemSetup {
    const mesh::TriMesh* mesh = nullptr;
    fem::MatFn coefficient;    // cell-frame coordinates
    int quadrature_order = 2;
    double cg_tol = 1e-10;
};

/// Solves the periodic cell problem for one direction: assemble, reduce to the
/// torus, divergence-form right-hand side, mean-zero CG.
CellSolution solve_cell_problem(const CellProblemSetup& setup, fem::Direction direction);

/// Equivalent tensor from the two directional correctors:
/// a_ij = (1/|Q|) int (e_i + grad N_i)' A (e_j + grad N_j), evaluated with the
/// assembly quadrature. Bounds, when finite, are checked against [alpha, beta].
EquivalentTensor equivalent_matrix(const CellSolution& cell_e1, const CellSolution& cell_e2,
                                   const CellProblemSetup& setup,
                                   double alpha = 0.0, double beta = 0.0);

/// Convenience: both directional solves plus the tensor integral.
EquivalentTensor compute_equivalent(const CellProblemSetup& setup, double alpha = 0.0,
                                    double beta = 0.0);

/// Reference tensor by periodic extension of one realization over an N-cell;
/// with N = 1 this is the identical computation as a single-block equivalent
/// tensor (same code path, bitwise equal results).
EquivalentTensor periodization_matrix(const CellProblemSetup& setup, int n_cells,
                                      double alpha = 0.0, double beta = 0.0);

/// Welford single-pass entrywise statistics; requires at least two tensors of
/// the same role family.
EmpiricalStats empirical_stats(const std::vector<EquivalentTensor>& tensors);

PerturbationDecomposition kl_decompose(
    const std::map<std::pair<int, int>, EquivalentTensor>& block_tensors,
    const EmpiricalStats& stats, double block_area);

enum class Region { d1, d2 };

/// Two-phase autocovariance of the scalar law a_phase * (1 + U) with U uniform
/// on [0, 1]: (1/12) a_s a_t for the (region_s, region_t) pair.
double covariance_two_phase(double a1, double a2, Region region_s, Region region_t);

/// Writes tensors as CSV rows:
/// sample_index,block_k1,block_k2,a11,a12,a21,a22,cg_iterations.
void write_tensor_csv(const std::vector<EquivalentTensor>& tensors, const std::string& path);

}  // namespace stochhom::homog
