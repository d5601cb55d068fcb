#include "stochhom/rng.hpp"

#include <cmath>

#include "stochhom/types.hpp"

namespace stochhom {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t master_seed, std::uint64_t sample_index,
         std::int64_t block_i, std::int64_t block_j, std::uint64_t lane) {
    // Absorb the key fields one by one so that every tuple component perturbs
    // the whole state.
    std::uint64_t h = master_seed;
    h = splitmix64(h) ^ (sample_index * 0x9e3779b97f4a7c15ULL);
    h = splitmix64(h) ^ static_cast<std::uint64_t>(block_i);
    h = splitmix64(h) ^ (static_cast<std::uint64_t>(block_j) * 0xda942042e4dd58b5ULL);
    h = splitmix64(h) ^ lane;
    std::uint64_t seeder = splitmix64(h);
    for (auto& s : s_) s = splitmix64(seeder);
}

std::uint64_t Rng::next_u64() {
    // xoshiro256++
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform01(); }

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * factor;
    has_cached_normal_ = true;
    return u * factor;
}

Rng derive_sample_stream(std::uint64_t master_seed, std::uint64_t sample_index,
                         std::int64_t block_i, std::int64_t block_j, StreamLane lane) {
    return Rng(master_seed, sample_index, block_i, block_j,
               static_cast<std::uint64_t>(lane));
}

double sample_uniform(Rng& rng) { return rng.uniform(-1.0, 1.0); }

double sample_truncated_normal(Rng& rng, double b) {
    if (!(b > 0.0)) throw ConfigError("truncated normal bound b must be positive");
    double z;
    do {
        z = rng.normal();
    } while (std::fabs(z) > b);
    return z;
}

}  // namespace stochhom
