#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ekt/dataset.hpp"
#include "ekt/verifier.hpp"

namespace ekt {

struct ExampleEvalResult {
    std::string example_id;
    std::size_t n_samples = 0;
    std::size_t n_correct = 0;
    std::vector<VerificationStatus> outcomes; // in sample_index order

    friend bool operator==(const ExampleEvalResult&, const ExampleEvalResult&) = default;
};

enum class PassAtKEstimator { Empirical, Unbiased };

std::string_view to_string(PassAtKEstimator estimator) noexcept;
PassAtKEstimator parse_estimator(std::string_view text);

struct DecodeMode {
    bool greedy = false;
    double temperature = 0.0;

    friend bool operator==(const DecodeMode&, const DecodeMode&) = default;
};

struct EvalReport {
    std::vector<std::size_t> k_values;
    std::map<std::size_t, double> pass_at_k;
    PassAtKEstimator estimator = PassAtKEstimator::Empirical;
    std::vector<ExampleEvalResult> per_example;
    DecodeMode decode_mode;
};

/// Samples keyed by example id, each list in sample_index order.
using SampleMap = std::map<std::string, std::vector<std::string>>;

/// Verifies every sample. Results follow dataset order. Throws
/// UnknownExampleId or EmptySampleList.
std::vector<ExampleEvalResult> evaluate_samples(const SampleMap& samples, std::span<const SpecExample> dataset,
                                                const CandidateChecker& checker = ArithmeticChecker{});

/// Mean over examples of 1{some correct sample among the first k}. Throws
/// InsufficientSamples when an example has fewer than k samples and
/// std::invalid_argument for k = 0 or no results.
double pass_at_k_empirical(std::span<const ExampleEvalResult> results, std::size_t k);

/// 1 - C(n-c, k) / C(n, k) in product form. Throws DomainError unless
/// 0 <= c <= n and 1 <= k <= n.
double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k);

/// Mean of pass_at_k_unbiased over examples.
double pass_at_k_unbiased(std::span<const ExampleEvalResult> results, std::size_t k);

EvalReport build_report(std::vector<ExampleEvalResult> results, std::span<const std::size_t> k_values,
                        PassAtKEstimator estimator, DecodeMode decode_mode);

/// Pretty-printed JSON with sorted keys.
std::string eval_report_json(const EvalReport& report);

// Sample file: a meta line
//   {"type":"meta","model_id","decode_mode","temperature","num_samples","seed"}
// followed by {"type":"sample","example_id","sample_index","program"} lines.
struct SampleFileMeta {
    std::string model_id;
    DecodeMode decode_mode;
    std::size_t num_samples = 0;
    std::uint64_t seed = 0;
};

struct SampleFile {
    SampleFileMeta meta;
    SampleMap samples;
};

/// Throws IoFailure or SchemaViolation (missing meta, duplicate or
/// non-contiguous sample_index per example).
SampleFile load_sample_file(const std::filesystem::path& path);

void save_sample_file(const SampleFile& file, const std::filesystem::path& path);

} // namespace ekt
