#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qv {

using RandomEngine = std::mt19937_64;

/// splitmix64 finalizer; a bijective mixer on 64-bit words.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a base seed and a path of indices
/// (e.g. {rep, tree}). Results depend only on the inputs, never on
/// scheduling, so parallel jobs stay reproducible.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base,
                                                  std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(base);
    for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632BE59BD9B4E019ULL));
    return s;
}

[[nodiscard]] inline RandomEngine make_engine(std::uint64_t base, std::initializer_list<std::uint64_t> path = {}) {
    return RandomEngine{derive_seed(base, path)};
}

}  // namespace qv
