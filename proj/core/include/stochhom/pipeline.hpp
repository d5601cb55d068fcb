#pragma once

#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stochhom/fem.hpp"
#include "stochhom/homogenize.hpp"
#include "stochhom/runconfig.hpp"

namespace stochhom::pipeline {

using MeshPtr = std::shared_ptr<const mesh::TriMesh>;

MeshPtr make_domain_mesh(int n);  // unit square, n subdivisions

/// Runs fn(0..count-1) over at most `workers` threads in contiguous chunks.
/// Each index is processed exactly once; any exception is rethrown after join.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

struct TwoStageResult {
    MeshPtr mesh0;
    fem::SolutionField first_mode;  // deterministic given the sampled mean
    homog::EmpiricalStats stats;
    homog::PerturbationDecomposition decomposition;
    std::vector<homog::EquivalentTensor> sample_tensors;  // one per sample
};

/// Stage 1 + stage 2, first mode only: L cell-problem samples on the M-cell,
/// empirical mean of the equivalent tensors, then one constant-coefficient
/// solve on the h0 mesh. Optionally also decomposes the per-block tensors of
/// sample 0 for the perturbation diagnostics.
TwoStageResult algorithm1_two_stage(const RunConfig& config, bool with_decomposition = true);

/// Block tensors of one sample over the whole domain partition.
std::map<std::pair<int, int>, homog::EquivalentTensor> sample_block_tensors(
    const RunConfig& config, int sample_index);

/// Solves the diffusion problem whose coefficient is constant per block
/// (block width M*epsilon); the mesh must not straddle block boundaries.
fem::SolutionField solve_equivalent_sample(
    const std::map<std::pair<int, int>, homog::EquivalentTensor>& block_tensors,
    const mesh::TriMesh& mesh_h1, double block_width, double f_value,
    int quadrature_order = 2, double cg_tol = 1e-10);

struct ReferenceResult {
    MeshPtr mesh1;
    fem::SolutionField mean_field;
    std::vector<std::vector<double>> sample_values;       // per-sample nodal values
    std::vector<homog::EquivalentTensor> tensors;         // all (sample, block) tensors
};

/// Monte Carlo reference: per sample, all block tensors and one
/// piecewise-constant solve on the h1 mesh; nodal average over samples in
/// deterministic sample order.
ReferenceResult algorithm2_reference(const RunConfig& config, bool keep_samples = true);

/// Modes of the perturbation expansion share one constant-coefficient operator
/// (assembled and reduced exactly once).
class ModeSolver {
public:
    ModeSolver(MeshPtr mesh, Mat2 mean_matrix, int quadrature_order = 2,
               double cg_tol = 1e-10);

    fem::SolutionField solve_mode0(double f_value) const;

    /// Next mode from -div(E grad u_n) = div(A1 grad u_{n-1}).
    fem::SolutionField next_mode(const fem::SolutionField& prev_mode,
                                 const std::function<Mat2(Vec2)>& a1_field, int n) const;

    const linalg::SparseMatrix* operator_matrix() const { return &system_.stiffness; }

private:
    MeshPtr mesh_;
    Mat2 mean_;
    int quadrature_order_;
    double cg_tol_;
    fem::AssembledSystem system_;
};

/// Free-function form over a sampled decomposition (block-piecewise A1).
fem::SolutionField mmc_mode_n(int n, const ModeSolver& solver,
                              const fem::SolutionField& prev_mode,
                              const homog::PerturbationDecomposition& decomposition);

struct DirectSolveResult {
    MeshPtr mesh;
    fem::SolutionField field;
};

/// Direct fine-mesh oracle for one realization of the oscillatory problem.
DirectSolveResult direct_fine_solve(const RunConfig& config, int sample_index, int n_fine);

/// ||u - ref||_L2 / ||ref||_L2 (cross-mesh quadrature on the finer mesh).
double relative_error(const fem::SolutionField& u, const fem::SolutionField& ref);

struct StudyResult {
    std::string abscissa_name;
    std::vector<double> abscissa;  // strictly increasing
    std::vector<std::pair<std::string, std::vector<double>>> observables;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;

    const std::vector<double>& observable(const std::string& name) const;
    std::string csv() const;
};

/// Var(a11) of the equivalent tensor versus cell size M over L samples;
/// slope of the log-log fit is -zeta_hat. Also reports delta(M).
StudyResult variance_decay_study(const RunConfig& config, const std::vector<int>& M_list);

/// Mean squared H1 distance between the perturbed solves mean + s*delta*A1 and
/// the mode-0 solve, versus the synthetic scale s; the log-log slope of the
/// quadratic response is ~2.
StudyResult delta_scaling_study(const RunConfig& config, const std::vector<double>& scale_list);

/// Variance of the empirical mean mu_L versus L over disjoint sample chunks
/// pooled across replicates; log-log slope ~ -1.
StudyResult sample_count_study(const RunConfig& config, const std::vector<int>& L_list);

/// Paired comparison of the per-cell empirical mean mu_L (L = N^2 samples)
/// against the N-cell periodization tensor computed from the same draws.
/// Observables per row: mu11, astar11, error, error_se (replicate-averaged).
StudyResult periodization_comparison_study(const RunConfig& config,
                                           const std::vector<int>& N_list);

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                    double* intercept = nullptr);

}  // namespace stochhom::pipeline
