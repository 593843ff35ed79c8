#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace fedstyle {

using Rng = std::mt19937_64;

/// FNV-1a over the bytes of a tag; used to name independent random streams.
std::uint64_t stream_tag(std::string_view tag);

/// Mixes a base seed with stream coordinates (round, client id, tag hash...)
/// through SplitMix64, so every coordinate tuple gets its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    return Rng(derive_seed(base, parts));
}

/// Uniform draw in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform(rng, 0.0, 1.0) < p;
}

}  // namespace fedstyle
