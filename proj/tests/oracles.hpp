// Test-only reference computations, independent of the library code paths
// they are used to check.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracles {

/// Dense Gaussian elimination with partial pivoting (row-major square matrix).
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        if (a[col][col] == 0.0) throw std::runtime_error("singular dense system");
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

/// Peak value u(1/2, 1/2) of -lap u = 1 on the unit square with zero boundary,
/// via the double sine series (odd terms only).
inline double poisson_unit_square_peak() {
    const double pi = std::numbers::pi;
    double s = 0.0;
    for (int m = 1; m < 400; m += 2) {
        for (int n = 1; n < 400; n += 2) {
            const double sign = ((m % 4 == 1) ? 1.0 : -1.0) * ((n % 4 == 1) ? 1.0 : -1.0);
            s += 16.0 / (pi * pi * pi * pi * m * n * (m * m + n * n)) * sign;
        }
    }
    return s;  // ~0.07367135
}

inline double std_normal_pdf(double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

inline double std_normal_cdf(double t) { return 0.5 * (1.0 + std::erf(t / std::sqrt(2.0))); }

/// Variance of the standard normal truncated to [-b, b].
inline double truncated_normal_variance(double b) {
    const double z = std_normal_cdf(b) - std_normal_cdf(-b);
    return 1.0 - 2.0 * b * std_normal_pdf(b) / z;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracles
