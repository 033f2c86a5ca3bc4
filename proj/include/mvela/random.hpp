#ifndef MVELA_RANDOM_HPP
#define MVELA_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace mvela {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
}

// Child seed for the index-th independent stream under a master seed. Used
// everywhere work is split (trees, rows, repetitions, folds) so that results
// do not depend on execution order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept
{
    return derive_seed(derive_seed(seed, a), b);
}

// 64-bit FNV-1a; stable across platforms, used for string-keyed seeds and config hashes.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace mvela

#endif
