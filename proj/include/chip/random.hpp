#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace chip {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Mixes a master seed with a list of stream coordinates into a child seed.
/// The result depends only on the inputs, so work split across threads draws
/// the same numbers as a serial run.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = detail::splitmix64(master);
    for (std::uint64_t c : coords) h = detail::splitmix64(h ^ detail::splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
    return Rng(derive_seed(master, coords));
}

}  // namespace chip
