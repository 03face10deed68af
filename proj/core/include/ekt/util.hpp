#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ekt::util {

std::string_view trim(std::string_view text) noexcept;

/// Splits on newlines; a trailing carriage return is dropped from each line.
std::vector<std::string_view> split_lines(std::string_view text);

/// 64-bit FNV-1a. Stable across platforms, used for fingerprints and config
/// hashes, never for anything adversarial.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept;

std::string hex64(std::uint64_t value);

/// Parses the whole of `text` as a decimal real. Leading '+' or '-' allowed.
std::optional<double> parse_real(std::string_view text);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

/// Writes via a sibling temporary file and rename, so readers never observe
/// a partially written file. Throws IoFailure.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

/// Whole file as a string. Throws IoFailure.
std::string read_text(const std::filesystem::path& path);

} // namespace ekt::util
