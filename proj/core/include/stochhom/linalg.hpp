#pragma once

#include <cstddef>
#include <vector>

namespace stochhom::linalg {

/// Sparse matrix in compressed-sparse-row form with canonical rows
/// (column indices strictly increasing, duplicates merged).
struct SparseMatrix {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<int> row_offsets;  // size n_rows + 1, nondecreasing
    std::vector<int> col_indices;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }

    /// Looks up entry (i, j); zero if not stored.
    double at(int i, int j) const;
};

/// Coordinate-format accumulator; build() sorts, merges duplicates and
/// produces the canonical CSR form.
class CooBuilder {
public:
    CooBuilder(int n_rows, int n_cols) : n_rows_(n_rows), n_cols_(n_cols) {}

    void add(int i, int j, double v) { entries_.push_back({i, j, v}); }
    SparseMatrix build() const;

private:
    struct Entry {
        int i, j;
        double v;
    };
    int n_rows_, n_cols_;
    std::vector<Entry> entries_;
};

struct LinearSolveReport {
    int iterations = 0;
    double final_residual_norm = 0.0;  // relative to the right-hand side norm
    bool converged = false;
};

enum class Preconditioner { none, jacobi };

/// y = A * x. Deterministic: entries within each row are accumulated in
/// storage order, no cross-thread reductions.
std::vector<double> spmv(const SparseMatrix& A, const std::vector<double>& x);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

/// Preconditioned conjugate gradients for symmetric positive definite A.
/// Stops when ||b - Ax||_2 <= tol * ||b||_2. Exceeding max_iter yields a
/// non-converged report; NaN residuals or p'Ap <= 0 (indefinite operator)
/// throw SolverError.
std::pair<std::vector<double>, LinearSolveReport> cg_solve(
    const SparseMatrix& A, const std::vector<double>& b, double tol = 1e-10,
    int max_iter = -1, Preconditioner precond = Preconditioner::jacobi,
    const std::vector<double>* initial_guess = nullptr);

/// CG for a symmetric positive semi-definite A whose nullspace is spanned by
/// the constant vector (periodic cell systems). The right-hand side is
/// projected orthogonal to constants, iterates are re-projected, and the
/// returned solution satisfies sum_i w_i x_i = 0 for the given positive
/// weights (lumped mass).
std::pair<std::vector<double>, LinearSolveReport> cg_solve_meanzero(
    const SparseMatrix& A, const std::vector<double>& b,
    const std::vector<double>& weights, double tol = 1e-10, int max_iter = -1,
    const std::vector<double>* initial_guess = nullptr);

}  // namespace stochhom::linalg
