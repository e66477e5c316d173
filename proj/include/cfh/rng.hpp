// Seeded random streams and deterministic parallel loops.
//
// Every random quantity is drawn from a stream identified by (seed, ordinal).
// The ordinal is a stratum, law, chunk or replicate index, never a thread
// index, so results do not depend on how work is split across threads.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace cfh {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stream seed: splitmix64(splitmix64(seed) ^ splitmix64(ordinal + tag)).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t ordinal, std::uint64_t tag = 0) {
    return splitmix64(splitmix64(seed) ^ splitmix64(ordinal * 0x100000001B3ULL + tag));
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t ordinal, std::uint64_t tag = 0) {
    return std::mt19937_64(stream_seed(seed, ordinal, tag));
}

// Uniform on the open interval (0,1).
inline double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Number of worker threads to use when the caller passes 0.
std::size_t default_threads();

// Runs body(i) for i in [0, n). Each index is processed exactly once; callers
// write results into per-index slots and reduce in index order afterwards.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace cfh
