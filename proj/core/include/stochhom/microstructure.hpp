#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stochhom/rng.hpp"
#include "stochhom/types.hpp"

namespace stochhom::micro {

struct Ellipse {
    Vec2 center;        // in the unit cell
    double semi_major = 0.0;
    double semi_minor = 0.0;
    double angle = 0.0;  // radians

    bool contains(Vec2 p) const;  // closed inclusion
};

/// Unit-cell inclusion geometry: either one axis-aligned square or a set of
/// pairwise disjoint ellipses produced by take-and-place.
struct CellGeometry {
    enum class Kind { square_inclusion, ellipse_set };

    Kind kind = Kind::square_inclusion;
    double lo = 0.25, hi = 0.75;   // square case
    std::vector<Ellipse> ellipses;  // ellipse case
    std::uint64_t seed = 0;         // provenance for dump/load

    static CellGeometry square(double lo, double hi);
    static CellGeometry ellipse_set(std::vector<Ellipse> e, std::uint64_t seed = 0);
};

enum class Phase { matrix_phase, inclusion_phase };

/// Phase of a point of the unit cell; inclusion boundaries count as inclusion.
Phase phase_at(const CellGeometry& geometry, Vec2 y);

/// Sequential random placement with rejection: an ellipse is accepted only if
/// it lies fully inside the unit cell and is disjoint from all accepted ones
/// (bounding-circle pre-test, then 64 boundary samples each way plus mutual
/// center containment). 10,000 consecutive rejections abort with a
/// packing-too-dense diagnostic.
CellGeometry take_and_place(int n_ellipses, double axis_min, double axis_max, Rng& rng);

enum class TestCase { a1, a2, b, c, custom };

std::string to_string(TestCase t);
TestCase test_case_from_string(const std::string& s);

enum class Distribution { uniform, truncated_normal };

/// Per-test-case knobs for the random structure draws.
struct MicrostructureParams {
    TestCase test_case = TestCase::a1;
    Distribution distribution = Distribution::truncated_normal;
    double trunc_bound = 1.5;
    int n_ellipses = -1;          // -1: per-test default (70 for A-II, 10 for B/C)
    double axis_min = -1.0;       // -1: per-test default
    double axis_max = -1.0;
    bool fixed_geometry = false;  // collapse geometry draws to one shared draw
    std::uint64_t master_seed = 42;

    int effective_n_ellipses() const;
    double effective_axis_min() const;
    double effective_axis_max() const;
    bool has_random_coefficient() const { return test_case != TestCase::b; }
    bool has_random_geometry() const {
        return (test_case == TestCase::b || test_case == TestCase::c) && !fixed_geometry;
    }
};

/// One drawn configuration of a grid of unit cells: per-cell geometry (shared
/// for the periodic-structure cases) and per-cell i.i.d. coefficient draws.
/// Identical (master_seed, sample_index) always reproduce the same realization.
struct SampleRealization {
    int sample_index = 0;
    int nx = 1, ny = 1;  // unit-cell grid dimensions
    bool shared_geometry = true;
    std::vector<CellGeometry> geometry;  // size 1 if shared, else nx*ny
    std::vector<double> z;               // size nx*ny, row-major

    const CellGeometry& geometry_at(int i, int j) const;
    double z_at(int i, int j) const { return z[static_cast<std::size_t>(j) * nx + i]; }
};

/// Draws the realization for (master_seed, sample_index) over an nx-by-ny grid
/// of unit cells with block offset (off_i, off_j) into the global cell index
/// space (the offset keys the per-cell streams, so sub-grids of a larger
/// realization reproduce its draws).
SampleRealization make_realization(const MicrostructureParams& params, int sample_index,
                                   int nx, int ny, int off_i = 0, int off_j = 0);

/// Matrix-valued coefficient of a realization, evaluated in microscopic
/// coordinates (unit-cell grid) or domain coordinates (x / epsilon).
/// Carries the ellipticity interval [alpha, beta] implied by the law.
struct CoefficientField {
    TestCase test_case = TestCase::a1;
    SampleRealization realization;
    double epsilon = 0.125;
    bool diagonal_only = false;  // suppress the literal off-diagonal terms
    double alpha = 0.0;
    double beta = 0.0;

    Mat2 at_cell(Vec2 y) const;  // y in [0, nx] x [0, ny] unit-cell coordinates
    Mat2 at_domain(Vec2 x) const { return at_cell({x.x / epsilon, x.y / epsilon}); }

    std::function<Mat2(Vec2)> cell_fn() const;
    std::function<Mat2(Vec2)> domain_fn() const;
};

CoefficientField make_coefficient_field(const MicrostructureParams& params,
                                        SampleRealization realization, double epsilon,
                                        bool diagonal_only);

/// Ellipticity interval of the law (phase extremes over the draw support).
/// alpha may be non-positive for the literal reading with wide draw support.
std::pair<double, double> ellipticity_bounds(TestCase test_case, Distribution distribution,
                                             double trunc_bound, bool diagonal_only);

/// Line-oriented text round-trip for geometry realizations.
void dump_geometry(const CellGeometry& g, const std::string& path);
CellGeometry load_geometry(const std::string& path);

}  // namespace stochhom::micro
