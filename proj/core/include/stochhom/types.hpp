#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stochhom {

/// Error category; the CLI maps these to stable exit codes.
enum class ErrorCategory { config, solver, placement, io, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, std::string msg)
        : std::runtime_error(std::move(msg)), category_(cat) {}
    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(std::string m) : Error(ErrorCategory::config, std::move(m)) {}
};
struct SolverError : Error {
    explicit SolverError(std::string m) : Error(ErrorCategory::solver, std::move(m)) {}
};
struct PlacementError : Error {
    explicit PlacementError(std::string m) : Error(ErrorCategory::placement, std::move(m)) {}
};
struct IoError : Error {
    explicit IoError(std::string m) : Error(ErrorCategory::io, std::move(m)) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

/// Dense 2x2 matrix. The coefficient fields and equivalent tensors handled
/// here are symmetric; symmetry is checked where it is a contract, not assumed.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 scaled_identity(double c) { return {c, 0.0, 0.0, c}; }
    static Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

    Vec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }

    Mat2 operator+(const Mat2& o) const { return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22}; }
    Mat2 operator-(const Mat2& o) const { return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22}; }
    Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    double max_abs() const {
        return std::max(std::max(std::fabs(a11), std::fabs(a12)),
                        std::max(std::fabs(a21), std::fabs(a22)));
    }

    bool symmetric(double tol) const {
        return std::fabs(a12 - a21) <= tol * std::max(1.0, max_abs());
    }

    /// Closed-form eigenvalues of the symmetrized matrix, ascending.
    std::array<double, 2> sym_eigenvalues() const {
        const double mid = 0.5 * (a11 + a22);
        const double off = 0.5 * (a12 + a21);
        const double rad = std::hypot(0.5 * (a11 - a22), off);
        return {mid - rad, mid + rad};
    }
};

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool contains(Vec2 p, double tol = 0.0) const {
        return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
    }
    bool same_as(const Rect& o, double tol = 1e-12) const {
        return std::fabs(x0 - o.x0) <= tol && std::fabs(y0 - o.y0) <= tol &&
               std::fabs(x1 - o.x1) <= tol && std::fabs(y1 - o.y1) <= tol;
    }
};

}  // namespace stochhom
