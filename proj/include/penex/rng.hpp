#pragma once

#include <cstdint>
#include <random>

namespace penex {

// Named random streams. Each (seed, stream) pair feeds an independent engine,
// so the order in which consumers draw never changes what they see.
enum class Stream : std::uint64_t {
    design = 1,
    noise = 2,
    labels = 3,
    monte_carlo = 4,
    curvature_mc = 5,
    gamma_mc = 6,
};

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hash a key tuple into a child seed. Order of keys matters.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key) noexcept
{
    return splitmix64(splitmix64(master) ^ (key + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key1,
                                    std::uint64_t key2) noexcept
{
    return derive_seed(derive_seed(master, key1), key2);
}

inline Engine make_engine(std::uint64_t seed, Stream stream)
{
    return Engine(derive_seed(seed, static_cast<std::uint64_t>(stream)));
}

}  // namespace penex
