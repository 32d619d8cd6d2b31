#pragma once

#include <cstdint>
#include <random>

namespace dlsim {

/// One step of the splitmix64 generator.  Used as a cheap, high-quality
/// mixing function so that sub-seeds derived from a common base seed are
/// statistically independent.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a deterministic sub-seed from a base seed and a stream tag.
/// Distinct (seed, tag) pairs give unrelated generators, so independent
/// consumers (weight init, data noise, batch shuffling, ...) never share a
/// random stream by accident.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x9E3779B97F4A7C15ULL));
}

/// Three-way variant for consumers indexed twice (e.g. per-batch, per-regime).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                 std::uint64_t index) {
    return derive_seed(derive_seed(seed, tag), index);
}

/// Canonical generator for the whole project.  All randomized code paths
/// construct their generator through this helper so a run is reproducible
/// from its seed alone.
inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace dlsim
