#pragma once

// Deterministic randomness for the simulator.
//
// Every run is a pure function of (config, seed). Two rules make that hold
// byte-for-byte at any parallelism degree:
//   1. Independent streams are derived from a base seed with mix_seed(),
//      a splitmix64-style finalizer (constants from D. Stafford's Mix13 /
//      Vigna's splitmix64). Stream r of base s is mix_seed(s, r).
//   2. Uniform variates come from unit_uniform(), which consumes exactly one
//      mt19937_64 output and maps the top 53 bits to [0,1). We do not use
//      std::uniform_real_distribution or std::bernoulli_distribution: the
//      number of engine calls they consume is implementation-defined.

#include <cstdint>
#include <random>

namespace clab::rng {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// 64-bit mix of (base seed, stream index); documented so runs can be
// reproduced outside this codebase.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream * kGolden + 1));
}

inline Engine make_engine(std::uint64_t base, std::uint64_t stream) {
    return Engine(mix_seed(base, stream));
}

// One engine output -> one double in [0,1), 53-bit resolution.
inline double unit_uniform(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Reserved stream indices for the non-draw randomness of a simulation.
// Rep r uses stream r directly, so these sit far above any plausible rep count.
inline constexpr std::uint64_t kProclivityStream = 0xffffffff00000001ull;
inline constexpr std::uint64_t kDefectorStream   = 0xffffffff00000002ull;

}  // namespace clab::rng
