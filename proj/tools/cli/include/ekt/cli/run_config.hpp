#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ekt/dataset.hpp"
#include "ekt/expert_iter.hpp"
#include "ekt/teacher_client.hpp"
#include "ekt/verifier.hpp"

namespace ekt::cli {

/// Where completions come from: a completion endpoint or the scripted mock.
struct SamplerSettings {
    enum class Kind { Http, Mock } kind = Kind::Http;

    TeacherEndpoint endpoint;
    std::optional<std::filesystem::path> audit_log;

    // Mock only. Examples without a script entry fall back to
    // `answer = <z>` with default_correct_probability, when one is set.
    std::string mock_model_id = "mock-teacher";
    std::map<std::string, GeneratorSpec, std::less<>> mock_script;
    std::optional<double> default_correct_probability;
    std::optional<std::string> default_decoy_program;
    std::int64_t latency_ms = 0;

    std::string model_id() const;
};

struct ExpertIterationSettings {
    std::string base_model = "student";
    SamplerSettings student;
    EIConfig config;
};

/// One JSON document describing a run. Flags override keys; keys override
/// defaults.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path dataset;
    std::size_t validation_size = 500;
    bool include_validation = false;
    std::optional<std::filesystem::path> prompt;
    std::filesystem::path output_dir = "run";
    ToleranceSpec tolerance;
    SamplingConfig sampling;
    SamplerSettings teacher;
    std::size_t workers = 1;
    bool keep_all_correct = false;
    std::optional<ExpertIterationSettings> expert_iteration;

    /// The merged document the run was built from; hashed into run-meta.
    std::string resolved_json;
};

/// Parses and validates. `base_dir` resolves relative paths. Throws
/// ConfigError (missing seed, bad values, missing files).
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);

/// Reads the file, applies `overrides` (dotted key -> JSON value text) and
/// parses.
RunConfig load_run_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides = {});

/// Sampler for the given examples (mock defaults need their answers).
std::unique_ptr<CompletionSampler> make_sampler(const SamplerSettings& settings, std::uint64_t seed,
                                                std::span<const SpecExample> examples);

FewShotPrompt resolve_prompt(const RunConfig& config);

/// Examples the run samples from: the train split, or everything with
/// include_validation.
std::vector<SpecExample> select_examples(const RunConfig& config, const std::vector<SpecExample>& dataset);

/// run-meta.json content: config hash, seeds and component versions.
std::string run_meta_json(std::string_view command, const RunConfig& config);

} // namespace ekt::cli
