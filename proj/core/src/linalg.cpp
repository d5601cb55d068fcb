#include "stochhom/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "stochhom/types.hpp"

namespace stochhom::linalg {

double SparseMatrix::at(int i, int j) const {
    for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        if (col_indices[k] == j) return values[k];
    return 0.0;
}

SparseMatrix CooBuilder::build() const {
    std::vector<Entry> sorted = entries_;
    std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });

    SparseMatrix m;
    m.n_rows = n_rows_;
    m.n_cols = n_cols_;
    m.row_offsets.assign(n_rows_ + 1, 0);
    m.col_indices.reserve(sorted.size());
    m.values.reserve(sorted.size());

    for (std::size_t k = 0; k < sorted.size();) {
        const int i = sorted[k].i;
        const int j = sorted[k].j;
        if (i < 0 || i >= n_rows_ || j < 0 || j >= n_cols_)
            throw ConfigError("sparse entry index out of range");
        double v = 0.0;
        while (k < sorted.size() && sorted[k].i == i && sorted[k].j == j)
            v += sorted[k++].v;
        m.col_indices.push_back(j);
        m.values.push_back(v);
        m.row_offsets[i + 1] = static_cast<int>(m.col_indices.size());
    }
    for (int i = 0; i < n_rows_; ++i)
        m.row_offsets[i + 1] = std::max(m.row_offsets[i + 1], m.row_offsets[i]);
    return m;
}

std::vector<double> spmv(const SparseMatrix& A, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != A.n_cols)
        throw ConfigError("spmv: dimension mismatch");
    std::vector<double> y(A.n_rows, 0.0);
    for (int i = 0; i < A.n_rows; ++i) {
        double s = 0.0;
        for (int k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k)
            s += A.values[k] * x[A.col_indices[k]];
        y[i] = s;
    }
    return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

namespace {

void spmv_into(const SparseMatrix& A, const std::vector<double>& x,
               std::vector<double>& y) {
    for (int i = 0; i < A.n_rows; ++i) {
        double s = 0.0;
        for (int k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k)
            s += A.values[k] * x[A.col_indices[k]];
        y[i] = s;
    }
}

// Removes the Euclidean constant component (used for the singular RHS and
// roundoff drift of the residual in the mean-zero solver).
void project_out_constants(std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double& x : v) x -= mean;
}

std::pair<std::vector<double>, LinearSolveReport> pcg(
    const SparseMatrix& A, const std::vector<double>& b, double tol, int max_iter,
    Preconditioner precond, const std::vector<double>* initial_guess,
    bool singular_constant_nullspace) {
    const int n = A.n_rows;
    if (A.n_cols != n) throw ConfigError("cg: matrix must be square");
    if (static_cast<int>(b.size()) != n) throw ConfigError("cg: rhs size mismatch");
    if (max_iter < 0) max_iter = 20 * n;

    std::vector<double> inv_diag;
    if (precond == Preconditioner::jacobi) {
        inv_diag.assign(n, 1.0);
        for (int i = 0; i < n; ++i) {
            const double d = A.at(i, i);
            if (d > 0.0) inv_diag[i] = 1.0 / d;
        }
    }

    std::vector<double> x(n, 0.0);
    if (initial_guess) {
        if (static_cast<int>(initial_guess->size()) != n)
            throw ConfigError("cg: initial guess size mismatch");
        x = *initial_guess;
        if (singular_constant_nullspace) project_out_constants(x);
    }

    const double bnorm = norm2(b);
    LinearSolveReport report;
    if (bnorm == 0.0) {
        report.converged = true;
        return {std::vector<double>(n, 0.0), report};
    }

    std::vector<double> r = b;
    if (initial_guess) {
        const auto Ax = spmv(A, x);
        for (int i = 0; i < n; ++i) r[i] -= Ax[i];
    }
    std::vector<double> z(n), p(n), Ap(n);

    auto apply_precond = [&](const std::vector<double>& in, std::vector<double>& out) {
        if (precond == Preconditioner::jacobi)
            for (int i = 0; i < n; ++i) out[i] = inv_diag[i] * in[i];
        else
            out = in;
        if (singular_constant_nullspace) project_out_constants(out);
    };

    double rnorm = norm2(r);
    if (rnorm <= tol * bnorm) {
        report.converged = true;
        report.final_residual_norm = rnorm / bnorm;
        return {x, report};
    }

    apply_precond(r, z);
    p = z;
    double rz = dot(r, z);

    for (int iter = 1; iter <= max_iter; ++iter) {
        spmv_into(A, p, Ap);
        const double pAp = dot(p, Ap);
        if (!std::isfinite(pAp)) throw SolverError("cg: non-finite curvature p'Ap");
        if (pAp <= 0.0) {
            if (rnorm <= tol * bnorm) break;
            throw SolverError("cg: operator not positive definite (p'Ap <= 0)");
        }
        const double alpha = rz / pAp;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        if (singular_constant_nullspace) project_out_constants(r);
        rnorm = norm2(r);
        report.iterations = iter;
        if (!std::isfinite(rnorm)) throw SolverError("cg: NaN residual");
        if (rnorm <= tol * bnorm) {
            report.converged = true;
            break;
        }
        apply_precond(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }

    report.final_residual_norm = rnorm / bnorm;
    return {x, report};
}

}  // namespace

std::pair<std::vector<double>, LinearSolveReport> cg_solve(
    const SparseMatrix& A, const std::vector<double>& b, double tol, int max_iter,
    Preconditioner precond, const std::vector<double>* initial_guess) {
    return pcg(A, b, tol, max_iter, precond, initial_guess, false);
}

std::pair<std::vector<double>, LinearSolveReport> cg_solve_meanzero(
    const SparseMatrix& A, const std::vector<double>& b,
    const std::vector<double>& weights, double tol, int max_iter,
    const std::vector<double>* initial_guess) {
    if (weights.size() != b.size()) throw ConfigError("cg_solve_meanzero: weights size mismatch");
    std::vector<double> b_proj = b;
    project_out_constants(b_proj);
    auto [x, report] =
        pcg(A, b_proj, tol, max_iter, Preconditioner::jacobi, initial_guess, true);

    // Shift along the nullspace to the weighted-mean-zero representative.
    double wx = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        wx += weights[i] * x[i];
        wsum += weights[i];
    }
    if (wsum <= 0.0) throw ConfigError("cg_solve_meanzero: weights must be positive");
    const double shift = wx / wsum;
    for (double& xi : x) xi -= shift;
    return {std::move(x), report};
}

}  // namespace stochhom::linalg
