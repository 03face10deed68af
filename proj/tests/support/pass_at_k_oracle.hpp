#pragma once

#include <cstddef>
#include <cstdint>

namespace ekt::testkit {

// Fraction of the k-subsets of n samples (c of them correct) that contain at
// least one correct sample, by listing every subset as a bitmask. n <= 20.
inline double pass_at_k_by_enumeration(std::size_t n, std::size_t c, std::size_t k)
{
    std::uint64_t subsets = 0;
    std::uint64_t hits = 0;
    const std::uint32_t correct_mask = (1U << c) - 1U;
    for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) {
            continue;
        }
        ++subsets;
        if ((mask & correct_mask) != 0U) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(subsets);
}

} // namespace ekt::testkit
