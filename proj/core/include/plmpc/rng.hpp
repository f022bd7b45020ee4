#pragma once

#include <cstdint>
#include <initializer_list>

namespace plmpc {

/// Deterministic 64-bit PRNG (splitmix64). Output is fully specified by the
/// seed, independent of platform and standard library, so experiment runs
/// reproduce byte-identically from a config seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi]; degenerate interval returns lo exactly.
    double uniform(double lo, double hi) {
        if (lo == hi) return lo;
        return lo + (hi - lo) * uniform01();
    }

private:
    std::uint64_t state_;
};

/// Derives a child seed from a master seed and a tag sequence, so that
/// independent random streams (per iteration, per channel, per purpose)
/// never alias. Same inputs always give the same child seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = master ^ 0x6a09e667f3bcc909ULL;
    for (std::uint64_t t : tags) {
        h ^= t + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        Rng mix(h);
        h = mix.next_u64();
    }
    return h;
}

}  // namespace plmpc
