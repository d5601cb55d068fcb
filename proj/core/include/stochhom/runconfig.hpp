#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stochhom/microstructure.hpp"

namespace stochhom::pipeline {

struct StudyParams {
    std::vector<int> L_list{4, 16, 64, 256};
    std::vector<int> M_list{1, 2, 4};
    std::vector<double> scale_list{0.125, 0.25, 0.5, 1.0};
    int replicates = 3;
    int samples = 16;    // per-scale sample count for the perturbation study
    double sigma = 0.5;  // exponent of the M = epsilon^-sigma coupling recipe
};

/// Full experiment description. Mesh sizes are stored as subdivisions per
/// unit length (h = 1/n_cell, h0 = 1/n0, h1 = 1/n1).
struct RunConfig {
    micro::TestCase test_case = micro::TestCase::a1;
    double epsilon = 0.125;
    int M = 1;
    int L = 100;  // sample count
    int N = 8;    // periodization size for comparisons
    int n_cell = 0;  // 0: per-test default, 60 for A_I else 120
    int n0 = 100;
    int n1 = 96;  // must align with block boundaries (n1 divisible by 1/(M*epsilon))
    int degree = 1;
    int quadrature_order = 2;
    double f_value = 10.0;
    micro::Distribution distribution = micro::Distribution::truncated_normal;
    double trunc_bound = 1.5;
    std::uint64_t master_seed = 42;
    bool diagonal_only = false;
    bool fixed_geometry = false;
    int n_ellipses = -1;
    double axis_min = -1.0;
    double axis_max = -1.0;
    int sample_index = 0;  // for single-sample subcommands
    int n_fine = 128;      // direct oracle subdivisions
    int workers = 1;
    StudyParams study;

    int cell_subdivisions() const {
        return n_cell > 0 ? n_cell : (test_case == micro::TestCase::a1 ? 60 : 120);
    }
    int cells_per_side() const;   // 1/epsilon
    int blocks_per_side() const;  // 1/(M*epsilon)

    micro::MicrostructureParams micro_params() const;

    /// Throws ConfigError naming the offending key on any violated invariant.
    void validate() const;
};

}  // namespace stochhom::pipeline
