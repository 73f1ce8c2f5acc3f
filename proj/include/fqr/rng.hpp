#pragma once

#include <cstdint>
#include <random>

namespace fqr {

// splitmix64 step; good enough to decorrelate derived seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derive an independent RNG stream from (base_seed, path...).  Replicate r of a
// Monte Carlo run uses make_stream(seed, r), so results do not depend on how
// replicates are scheduled across threads.
template <typename... Path>
std::mt19937_64 make_stream(std::uint64_t base_seed, Path... path) {
    std::uint64_t s = base_seed ^ 0xA5A5A5A55A5A5A5AULL;
    std::uint64_t mixed = splitmix64(s);
    ((s ^= static_cast<std::uint64_t>(path) + 0x9E3779B97F4A7C15ULL + (mixed << 6),
      mixed = splitmix64(s)),
     ...);
    return std::mt19937_64(mixed);
}

}  // namespace fqr
