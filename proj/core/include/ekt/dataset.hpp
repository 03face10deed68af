#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ekt {

/// One weakly-supervised instance: a question and its numeric answer, no
/// gold program.
struct SpecExample {
    std::string id;
    std::string question;
    double answer = 0.0;

    friend bool operator==(const SpecExample&, const SpecExample&) = default;
};

struct DatasetSplit {
    std::vector<SpecExample> train;
    std::vector<SpecExample> validation;
    std::uint64_t seed = 0;
};

/// Id given to a record without one, from its 0-based position in the input.
std::string positional_id(std::size_t position);

/// Parses one JSON record. Accepts the raw GSM8k shape (`answer` is a
/// rationale whose last `#### ` line holds the number) as well as the
/// canonical shape written by serialize_example (`answer` is a number).
/// Throws MalformedRecord or UnparsableAnswer.
SpecExample parse_record(std::string_view raw, std::size_t position);

/// Extracts the final numeric answer from rationale text. Throws
/// UnparsableAnswer.
double extract_answer(std::string_view answer_text);

/// One canonical JSON line (no trailing newline).
std::string serialize_example(const SpecExample& example);

/// Reads a JSONL file, skipping (with a warning) records that fail to parse
/// and records whose id repeats an earlier one. Throws IoFailure.
std::vector<SpecExample> load_dataset(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& path, std::span<const SpecExample> examples);

/// Stable fingerprint of the canonical serialization, in order.
std::string dataset_fingerprint(std::span<const SpecExample> examples);

/// Holds out a uniformly random subset of `validation_size` examples. Both
/// halves keep input order. Throws InsufficientExamples.
DatasetSplit split_dataset(std::span<const SpecExample> examples, std::size_t validation_size,
                           std::uint64_t seed);

} // namespace ekt
