#include "ekt/rng.hpp"

#include <limits>
#include <stdexcept>

#include "ekt/util.hpp"

namespace ekt::rng {

std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept
{
    std::uint64_t state = seed ^ util::fnv1a64(stream);
    splitmix64(state);
    return splitmix64(state);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index) noexcept
{
    std::uint64_t state = derive_seed(seed, stream);
    state ^= index * 0xd1b54a32d192ed03ULL;
    splitmix64(state);
    return splitmix64(state);
}

Engine make_engine(std::uint64_t seed)
{
    return Engine(seed);
}

std::uint64_t uniform_index(Engine& engine, std::uint64_t n)
{
    if (n == 0) {
        throw std::invalid_argument("uniform_index: empty range");
    }
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
        - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t draw = engine();
    while (draw >= limit) {
        draw = engine();
    }
    return draw % n;
}

double uniform01(Engine& engine)
{
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

} // namespace ekt::rng
