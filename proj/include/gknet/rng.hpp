#pragma once

#include <cstdint>
#include <random>

namespace gknet {

using Rng = std::mt19937_64;

/// Independent generator for one (purpose, a, b) coordinate under a master
/// seed. Streams for distinct coordinates never share state, so results do not
/// depend on how jobs are scheduled.
inline Rng make_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a = 0, std::uint64_t b = 0) {
    auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x); };
    auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(purpose), hi(purpose), lo(a), hi(a), lo(b), hi(b)};
    return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t chain = 1;
inline constexpr std::uint64_t network = 2;
inline constexpr std::uint64_t sample = 3;
inline constexpr std::uint64_t folds = 4;
}  // namespace stream

}  // namespace gknet
