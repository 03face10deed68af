#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ekt/dataset.hpp"
#include "ekt/teacher_client.hpp"
#include "ekt/verifier.hpp"

namespace ekt {

/// A verified (question, program, answer) triple.
struct KnowledgeEntry {
    std::string example_id;
    std::string question;
    std::string program;
    double answer = 0.0;
    std::string teacher_id;
    std::size_t sample_index = 0;
    double produced_value = 0.0;

    friend bool operator==(const KnowledgeEntry&, const KnowledgeEntry&) = default;
};

struct AcquisitionMeta {
    std::string teacher_id;
    double temperature = 0.0;
    std::size_t num_samples = 0;
    std::uint64_t seed = 0;
    std::string dataset_fingerprint;

    friend bool operator==(const AcquisitionMeta&, const AcquisitionMeta&) = default;
};

/// At most one entry per example, in dataset order.
struct KnowledgeSet {
    AcquisitionMeta meta;
    std::vector<KnowledgeEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    bool contains(std::string_view example_id) const noexcept;
    const KnowledgeEntry* find(std::string_view example_id) const noexcept;

    friend bool operator==(const KnowledgeSet&, const KnowledgeSet&) = default;
};

struct ExampleCoverage {
    std::size_t num_samples = 0;
    std::size_t num_correct = 0;

    friend bool operator==(const ExampleCoverage&, const ExampleCoverage&) = default;
};

struct CoverageReport {
    std::size_t covered = 0;
    std::size_t total = 0;
    double fraction = 0.0;
    std::map<std::string, ExampleCoverage> per_example;

    friend bool operator==(const CoverageReport&, const CoverageReport&) = default;
};

/// covered / total. Throws EmptyDataset when total is zero.
double coverage(const CoverageReport& report);

struct AcquisitionOptions {
    /// Checker used to filter samples; nullptr means ArithmeticChecker with
    /// `tolerance`.
    const CandidateChecker* checker = nullptr;
    ToleranceSpec tolerance;
    /// Per-example completion log. When it already holds records for this
    /// configuration they are replayed instead of re-sampled.
    std::optional<std::filesystem::path> checkpoint;
    /// Also return every correct sample, not only the selected one.
    bool keep_all_correct = false;
    /// Examples processed concurrently.
    std::size_t workers = 1;
};

struct AcquisitionResult {
    KnowledgeSet knowledge;
    CoverageReport report;
    std::vector<KnowledgeEntry> all_correct; // only with keep_all_correct
};

/// Samples config.num_samples completions per example, verifies each against
/// the example's answer and, where at least one is correct, keeps one chosen
/// uniformly at random among all correct samples (duplicates count
/// separately). The choice depends only on (seed, example id, sample slots),
/// never on completion arrival order. Throws std::invalid_argument on an
/// empty dataset; sampler errors propagate after finished examples have been
/// checkpointed.
AcquisitionResult acquire_knowledge(std::span<const SpecExample> dataset, CompletionSampler& sampler,
                                    const PromptBuilder& prompt, const SamplingConfig& config, std::uint64_t seed,
                                    const AcquisitionOptions& options = {});

AcquisitionResult acquire_knowledge(std::span<const SpecExample> dataset, CompletionSampler& sampler,
                                    const FewShotPrompt& prompt, const SamplingConfig& config, std::uint64_t seed,
                                    const AcquisitionOptions& options = {});

/// Index into `correct_slots` picked for `example_id` under `seed`.
std::size_t select_correct_sample(std::size_t num_correct, std::uint64_t seed, std::string_view example_id);

/// JSONL: a meta line followed by one line per entry. Written atomically.
void save_knowledge_set(const KnowledgeSet& knowledge, const std::filesystem::path& path);

/// Also writes `entries` with the knowledge-set schema; used for the
/// keep-all-correct analysis file, where an example may repeat.
void save_entries(const AcquisitionMeta& meta, std::span<const KnowledgeEntry> entries,
                  const std::filesystem::path& path);

/// Parses and re-verifies every entry. Throws IoFailure, SchemaViolation or
/// InvariantViolation.
KnowledgeSet load_knowledge_set(const std::filesystem::path& path, const ToleranceSpec& tolerance = {});

std::string coverage_report_json(const CoverageReport& report);
CoverageReport parse_coverage_report(std::string_view json_text);

} // namespace ekt
