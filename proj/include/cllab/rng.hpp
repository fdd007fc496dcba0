#pragma once

#include <cstdint>

namespace cllab {

// Counter-based deterministic PRNG (SplitMix64).
//
// The n-th output of a stream is mix64(seed + (n+1) * GOLDEN_GAMMA), so a
// state is fully described by (seed, position) and the same seed yields the
// same bit sequence on every platform. Streams are split by remixing the
// seed with a stream index; a child stream starts at position 0.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t pos = 0;
};

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

inline RngState make_rng(std::uint64_t seed) { return RngState{seed, 0}; }

inline std::uint64_t next_u64(RngState& s) {
    ++s.pos;
    return mix64(s.seed + s.pos * kGoldenGamma);
}

// Uniform double in [0, 1) using the top 53 bits.
inline double next_uniform(RngState& s) {
    return static_cast<double>(next_u64(s) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch); consumes two draws so the
// stream position advances by exactly 2 per sample.
double next_normal(RngState& s);

// Derives an independent child stream from (seed, stream index). A pure
// function of its arguments, so parallel and serial consumers that split the
// same parent identically see identical sequences.
inline RngState split_stream(const RngState& s, std::uint64_t stream) {
    return RngState{mix64(s.seed ^ mix64(stream + 0x632BE59BD9B4E019ULL)), 0};
}

}  // namespace cllab
