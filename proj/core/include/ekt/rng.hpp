#pragma once

#include <cstdint>
#include <random>
#include <string_view>

// Seed plumbing shared by every stochastic component. A run has one top-level
// seed; components draw from named substreams so that adding draws in one
// component never shifts another component's sequence.
//
// Distributions are implemented here rather than with <random>'s
// distribution classes, whose outputs are implementation-defined. The engine
// itself (mt19937_64) is fully specified by the standard.
namespace ekt::rng {

using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed of the substream `stream` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;

/// Seed of element `index` of substream `stream`, e.g. one per sample slot.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t index) noexcept;

Engine make_engine(std::uint64_t seed);

/// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_index(Engine& engine, std::uint64_t n);

/// Uniform real in [0, 1) with 53 bits of resolution.
double uniform01(Engine& engine);

// Named substreams used across the pipeline.
inline constexpr std::string_view kSplitStream = "split";
inline constexpr std::string_view kSelectionStream = "acquisition-selection";
inline constexpr std::string_view kMockTeacherStream = "mock-teacher";
inline constexpr std::string_view kExpertIterationStream = "expert-iteration";

} // namespace ekt::rng
