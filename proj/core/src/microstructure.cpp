#include "stochhom/microstructure.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace stochhom::micro {

namespace {

constexpr int kBoundarySamples = 64;
constexpr int kMaxConsecutiveRejections = 10000;

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

Vec2 boundary_point(const Ellipse& e, double theta) {
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double u = e.semi_major * std::cos(theta);
    const double v = e.semi_minor * std::sin(theta);
    return {e.center.x + c * u - s * v, e.center.y + s * u + c * v};
}

bool inside_unit_cell(const Ellipse& e) {
    // Exact bounding box of the rotated ellipse.
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double wx = std::hypot(e.semi_major * c, e.semi_minor * s);
    const double wy = std::hypot(e.semi_major * s, e.semi_minor * c);
    return e.center.x - wx >= 0.0 && e.center.x + wx <= 1.0 &&
           e.center.y - wy >= 0.0 && e.center.y + wy <= 1.0;
}

bool overlaps(const Ellipse& a, const Ellipse& b) {
    const double dist = (a.center - b.center).norm();
    if (dist >= a.semi_major + b.semi_major) return false;  // bounding circles disjoint
    if (a.contains(b.center) || b.contains(a.center)) return true;
    for (int k = 0; k < kBoundarySamples; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / kBoundarySamples;
        if (b.contains(boundary_point(a, theta))) return true;
        if (a.contains(boundary_point(b, theta))) return true;
    }
    return false;
}

double draw_z(const MicrostructureParams& params, Rng& rng) {
    switch (params.distribution) {
        case Distribution::uniform: return sample_uniform(rng);
        case Distribution::truncated_normal:
            return sample_truncated_normal(rng, params.trunc_bound);
    }
    throw ConfigError("unknown distribution");
}

// Phase base values and perturbation weights of the two-phase law:
// matrix 3*I + (1 + sin*sin*delta_ij) Z, inclusion 300*I + (50 + sin*sin*delta_ij) Z.
struct PhaseLaw {
    double base;
    double weight;
};

PhaseLaw phase_law(Phase phase) {
    return phase == Phase::matrix_phase ? PhaseLaw{3.0, 1.0} : PhaseLaw{300.0, 50.0};
}

}  // namespace

bool Ellipse::contains(Vec2 p) const {
    const Vec2 d = p - center;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (c * d.x + s * d.y) / semi_major;
    const double v = (-s * d.x + c * d.y) / semi_minor;
    return u * u + v * v <= 1.0;
}

CellGeometry CellGeometry::square(double lo, double hi) {
    if (!(0.0 < lo && lo < hi && hi < 1.0))
        throw ConfigError("square inclusion bounds must satisfy 0 < lo < hi < 1");
    CellGeometry g;
    g.kind = Kind::square_inclusion;
    g.lo = lo;
    g.hi = hi;
    return g;
}

CellGeometry CellGeometry::ellipse_set(std::vector<Ellipse> e, std::uint64_t seed) {
    CellGeometry g;
    g.kind = Kind::ellipse_set;
    g.ellipses = std::move(e);
    g.seed = seed;
    return g;
}

Phase phase_at(const CellGeometry& geometry, Vec2 y) {
    if (geometry.kind == CellGeometry::Kind::square_inclusion) {
        if (y.x >= geometry.lo && y.x <= geometry.hi && y.y >= geometry.lo &&
            y.y <= geometry.hi)
            return Phase::inclusion_phase;
        return Phase::matrix_phase;
    }
    for (const Ellipse& e : geometry.ellipses)
        if (e.contains(y)) return Phase::inclusion_phase;
    return Phase::matrix_phase;
}

CellGeometry take_and_place(int n_ellipses, double axis_min, double axis_max, Rng& rng) {
    if (n_ellipses < 0) throw ConfigError("take_and_place: negative ellipse count");
    if (n_ellipses > 0 && !(0.0 < axis_min && axis_min <= axis_max))
        throw ConfigError("take_and_place: invalid axis range");
    if (n_ellipses * std::numbers::pi * axis_max * axis_max >= 0.5)
        throw PlacementError("take_and_place: requested packing exceeds half the cell area");

    std::vector<Ellipse> accepted;
    accepted.reserve(n_ellipses);
    int rejections = 0;
    while (static_cast<int>(accepted.size()) < n_ellipses) {
        Ellipse cand;
        cand.center = {rng.uniform01(), rng.uniform01()};
        const double r1 = rng.uniform(axis_min, axis_max);
        const double r2 = rng.uniform(axis_min, axis_max);
        cand.semi_major = std::max(r1, r2);
        cand.semi_minor = std::min(r1, r2);
        cand.angle = rng.uniform(0.0, std::numbers::pi);

        bool ok = inside_unit_cell(cand);
        for (std::size_t k = 0; ok && k < accepted.size(); ++k)
            ok = !overlaps(cand, accepted[k]);

        if (ok) {
            accepted.push_back(cand);
            rejections = 0;
        } else if (++rejections >= kMaxConsecutiveRejections) {
            std::ostringstream msg;
            msg << "take_and_place: placement failed after " << rejections
                << " consecutive rejections with " << accepted.size() << "/" << n_ellipses
                << " ellipses placed (packing too dense)";
            throw PlacementError(msg.str());
        }
    }
    return CellGeometry::ellipse_set(std::move(accepted));
}

std::string to_string(TestCase t) {
    switch (t) {
        case TestCase::a1: return "A_I";
        case TestCase::a2: return "A_II";
        case TestCase::b: return "B";
        case TestCase::c: return "C";
        case TestCase::custom: return "custom";
    }
    return "?";
}

TestCase test_case_from_string(const std::string& s) {
    if (s == "A_I") return TestCase::a1;
    if (s == "A_II") return TestCase::a2;
    if (s == "B") return TestCase::b;
    if (s == "C") return TestCase::c;
    if (s == "custom") return TestCase::custom;
    throw ConfigError("unknown test_case '" + s + "' (expected A_I, A_II, B or C)");
}

int MicrostructureParams::effective_n_ellipses() const {
    if (n_ellipses >= 0) return n_ellipses;
    return test_case == TestCase::a2 ? 70 : 10;
}

double MicrostructureParams::effective_axis_min() const {
    if (axis_min > 0.0) return axis_min;
    return test_case == TestCase::a2 ? 0.02 : 0.05;
}

double MicrostructureParams::effective_axis_max() const {
    if (axis_max > 0.0) return axis_max;
    return test_case == TestCase::a2 ? 0.04 : 0.08;
}

const CellGeometry& SampleRealization::geometry_at(int i, int j) const {
    if (shared_geometry) return geometry.front();
    return geometry[static_cast<std::size_t>(j) * nx + i];
}

SampleRealization make_realization(const MicrostructureParams& params, int sample_index,
                                   int nx, int ny, int off_i, int off_j) {
    SampleRealization r;
    r.sample_index = sample_index;
    r.nx = nx;
    r.ny = ny;

    switch (params.test_case) {
        case TestCase::a1:
            r.shared_geometry = true;
            r.geometry.push_back(CellGeometry::square(0.25, 0.75));
            break;
        case TestCase::a2: {
            // Periodic structure: one geometry draw, shared by every cell and sample.
            r.shared_geometry = true;
            Rng g = derive_sample_stream(params.master_seed, 0, 0, 0,
                                         StreamLane::shared_geometry);
            r.geometry.push_back(take_and_place(params.effective_n_ellipses(),
                                                params.effective_axis_min(),
                                                params.effective_axis_max(), g));
            r.geometry.back().seed = params.master_seed;
            break;
        }
        case TestCase::b:
        case TestCase::c:
            if (params.fixed_geometry) {
                r.shared_geometry = true;
                Rng g = derive_sample_stream(params.master_seed, 0, 0, 0,
                                             StreamLane::shared_geometry);
                r.geometry.push_back(take_and_place(params.effective_n_ellipses(),
                                                    params.effective_axis_min(),
                                                    params.effective_axis_max(), g));
            } else {
                r.shared_geometry = false;
                r.geometry.reserve(static_cast<std::size_t>(nx) * ny);
                for (int j = 0; j < ny; ++j) {
                    for (int i = 0; i < nx; ++i) {
                        Rng g = derive_sample_stream(params.master_seed, sample_index,
                                                     off_i + i, off_j + j,
                                                     StreamLane::geometry);
                        r.geometry.push_back(take_and_place(params.effective_n_ellipses(),
                                                            params.effective_axis_min(),
                                                            params.effective_axis_max(), g));
                    }
                }
            }
            break;
        case TestCase::custom:
            throw ConfigError("make_realization: custom test case has no built-in law");
    }

    r.z.resize(static_cast<std::size_t>(nx) * ny, 0.0);
    if (params.has_random_coefficient()) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Rng zs = derive_sample_stream(params.master_seed, sample_index, off_i + i,
                                              off_j + j, StreamLane::coefficient);
                r.z[static_cast<std::size_t>(j) * nx + i] = draw_z(params, zs);
            }
        }
    }
    return r;
}

Mat2 CoefficientField::at_cell(Vec2 y) const {
    int ci = static_cast<int>(std::floor(y.x));
    int cj = static_cast<int>(std::floor(y.y));
    ci = std::clamp(ci, 0, realization.nx - 1);
    cj = std::clamp(cj, 0, realization.ny - 1);

    const Vec2 local{y.x - ci, y.y - cj};
    const Phase phase = phase_at(realization.geometry_at(ci, cj), local);
    const auto [base, weight] = phase_law(phase);

    if (test_case == TestCase::b) return Mat2::scaled_identity(base);

    const double z = realization.z_at(ci, cj);
    const double osc = std::sin(2.0 * std::numbers::pi * y.x) *
                       std::sin(2.0 * std::numbers::pi * y.y);
    const double diag = base + (weight + osc) * z;
    const double off = diagonal_only ? 0.0 : weight * z;
    return {diag, off, off, diag};
}

std::function<Mat2(Vec2)> CoefficientField::cell_fn() const {
    return [this](Vec2 y) { return at_cell(y); };
}

std::function<Mat2(Vec2)> CoefficientField::domain_fn() const {
    return [this](Vec2 x) { return at_domain(x); };
}

std::pair<double, double> ellipticity_bounds(TestCase test_case, Distribution distribution,
                                             double trunc_bound, bool diagonal_only) {
    if (test_case == TestCase::b) return {3.0, 300.0};
    const double zmax = distribution == Distribution::uniform ? 1.0 : trunc_bound;
    // Eigenvalues per phase: base + (w + s) z +- |w z| (literal) collapse to the
    // diagonal entries when the off-diagonal term is suppressed.
    const double reach1 = diagonal_only ? 2.0 * zmax : 3.0 * zmax;     // matrix phase, w = 1
    const double reach2 = diagonal_only ? 51.0 * zmax : 101.0 * zmax;  // inclusion, w = 50
    const double alpha = std::min(3.0 - reach1, 300.0 - reach2);
    const double beta = std::max(3.0 + reach1, 300.0 + reach2);
    return {alpha, beta};
}

CoefficientField make_coefficient_field(const MicrostructureParams& params,
                                        SampleRealization realization, double epsilon,
                                        bool diagonal_only) {
    CoefficientField f;
    f.test_case = params.test_case;
    f.realization = std::move(realization);
    f.epsilon = epsilon;
    f.diagonal_only = diagonal_only;
    std::tie(f.alpha, f.beta) = ellipticity_bounds(params.test_case, params.distribution,
                                                   params.trunc_bound, diagonal_only);
    return f;
}

void dump_geometry(const CellGeometry& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("dump_geometry: cannot open " + path);
    if (g.kind == CellGeometry::Kind::square_inclusion) {
        out << "# kind=square_inclusion seed=" << g.seed << " lo=" << fmt(g.lo)
            << " hi=" << fmt(g.hi) << "\n";
    } else {
        out << "# kind=ellipse_set seed=" << g.seed << " count=" << g.ellipses.size()
            << "\n";
        for (const Ellipse& e : g.ellipses)
            out << fmt(e.center.x) << " " << fmt(e.center.y) << " " << fmt(e.semi_major)
                << " " << fmt(e.semi_minor) << " " << fmt(e.angle) << "\n";
    }
    if (!out) throw IoError("dump_geometry: write failed for " + path);
}

CellGeometry load_geometry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_geometry: cannot open " + path);
    std::string header;
    std::getline(in, header);
    auto field = [&](const std::string& key) -> std::string {
        const auto pos = header.find(key + "=");
        if (pos == std::string::npos)
            throw IoError("load_geometry: missing '" + key + "' in header of " + path);
        const auto start = pos + key.size() + 1;
        const auto end = header.find(' ', start);
        return header.substr(start, end == std::string::npos ? end : end - start);
    };

    const std::string kind = field("kind");
    if (kind == "square_inclusion") {
        CellGeometry g = CellGeometry::square(std::stod(field("lo")), std::stod(field("hi")));
        g.seed = std::stoull(field("seed"));
        return g;
    }
    if (kind != "ellipse_set") throw IoError("load_geometry: unknown kind '" + kind + "'");
    const std::size_t count = std::stoull(field("count"));
    std::vector<Ellipse> ellipses;
    ellipses.reserve(count);
    Ellipse e;
    while (in >> e.center.x >> e.center.y >> e.semi_major >> e.semi_minor >> e.angle)
        ellipses.push_back(e);
    if (ellipses.size() != count)
        throw IoError("load_geometry: expected " + std::to_string(count) + " ellipses");
    return CellGeometry::ellipse_set(std::move(ellipses), std::stoull(field("seed")));
}

}  // namespace stochhom::micro
