#pragma once

#include <cstdint>

namespace stochhom {

/// Deterministic counter-seeded random stream (xoshiro256++ state derived by
/// splitmix64 from a key tuple). Streams for distinct tuples are statistically
/// independent; the same tuple always reproduces the same sequence, regardless
/// of which thread or in which order streams are created.
class Rng {
public:
    Rng() : Rng(0, 0, 0, 0, 0) {}
    Rng(std::uint64_t master_seed, std::uint64_t sample_index,
        std::int64_t block_i, std::int64_t block_j, std::uint64_t lane = 0);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Uniform double in [a, b).
    double uniform(double a, double b);

    /// Standard normal via Marsaglia's polar method.
    double normal();

private:
    std::uint64_t s_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Stream lanes keep draws for unrelated purposes (coefficients vs geometry)
/// independent even at identical (seed, sample, block) keys.
enum class StreamLane : std::uint64_t {
    coefficient = 0,
    geometry = 1,
    shared_geometry = 2,
    study = 3,
};

/// Derives the random stream uniquely determined by
/// (master_seed, sample_index, block_index, lane).
Rng derive_sample_stream(std::uint64_t master_seed, std::uint64_t sample_index,
                         std::int64_t block_i, std::int64_t block_j,
                         StreamLane lane = StreamLane::coefficient);

/// Uniform draw on [-1, 1].
double sample_uniform(Rng& rng);

/// Truncated standard normal on [-b, b] via rejection (exact distribution,
/// acceptance probability ~0.866 at b = 1.5).
double sample_truncated_normal(Rng& rng, double b);

}  // namespace stochhom
