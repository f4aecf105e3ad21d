// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gotok {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream per (seed, key) so that processing order never
/// changes results.
inline Rng stream_for(std::uint64_t seed, std::string_view key) {
    return Rng(mix_seed(seed ^ fnv1a(key)));
}

inline Rng stream_for(std::uint64_t seed, std::uint64_t key) {
    return Rng(mix_seed(seed ^ mix_seed(key + 0x51ed270b27a5c3e9ULL)));
}

}  // namespace gotok
