// rng.hpp — seed derivation for reproducible parallel sampling
#pragma once

#include <cstdint>
#include <random>

namespace afcmem::rng {

// splitmix64 finalizer; decorrelates (master_seed, stream_index) pairs.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive(std::uint64_t master_seed, std::uint64_t stream_index) {
    return mix(master_seed ^ mix(stream_index + 1));
}

inline std::mt19937_64 engine(std::uint64_t master_seed, std::uint64_t stream_index) {
    return std::mt19937_64(derive(master_seed, stream_index));
}

}  // namespace afcmem::rng
