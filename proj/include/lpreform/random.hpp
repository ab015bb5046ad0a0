#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace lpreform {

using Rng = std::mt19937_64;

/// Uniform in [0, 1) from the top 53 bits. Unlike std::uniform_real_distribution
/// this is specified exactly, so streams match across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n) by rejection, avoiding modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    return r % n;
}

/// Derives an independent stream seed from a base seed and a stream index (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::string rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline void restore_rng(Rng& rng, const std::string& state) {
    std::istringstream is(state);
    is >> rng;
}

}  // namespace lpreform
