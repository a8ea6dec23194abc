#pragma once

// Deterministic RNG plumbing. All stochastic pieces of the pipeline draw
// from mt19937_64 streams whose seeds are derived from a master seed via
// splitmix64, so runs are reproducible and independent work items
// (trajectories, boxes, pool draws) can be processed in any order.

#include <cstdint>
#include <random>

namespace kkl {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seed for the index-th worker stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 1));
}

using Rng = std::mt19937_64;

// Uniform in [0,1) from the top 53 bits; avoids distribution-object
// implementation differences.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace kkl
