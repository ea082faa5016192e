#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ato {

// Seed splitting: every random stream is keyed by (root seed, component name,
// index). Streams never depend on scheduling, so results are identical for any
// number of worker threads.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view component,
                                    std::uint64_t index = 0) {
    return splitmix64(root ^ splitmix64(fnv1a(component) ^ splitmix64(index)));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::string_view component, std::uint64_t index = 0) {
    return Rng(derive_seed(root, component, index));
}

}  // namespace ato
