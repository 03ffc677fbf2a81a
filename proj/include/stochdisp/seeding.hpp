#pragma once

#include <cstdint>

namespace stochdisp {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based child seed: depends only on (master, stream, index), so trial
/// k of stream s gets the same seed regardless of how many trials run or in
/// which order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) noexcept {
    return mix64(mix64(mix64(master) ^ (stream * 0xd1342543de82ef95ULL)) ^ (index + 0x632be59bd9b4e019ULL));
}

}  // namespace stochdisp
