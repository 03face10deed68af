#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ekt/dataset.hpp"
#include "ekt/errors.hpp"
#include "ekt/knowledge.hpp"
#include "ekt/teacher_client.hpp"
#include "ekt/verifier.hpp"

namespace ekt {

/// Opaque handle to a student checkpoint. For the untuned student,
/// checkpoint_path is empty and model_id names the base model.
struct ModelRef {
    std::string model_id;
    std::string checkpoint_path;

    friend bool operator==(const ModelRef&, const ModelRef&) = default;
};

/// Student fine-tuning hyperparameters, handed to the trainer process as
/// JSON. Defaults are the full-training recipe.
struct TrainingConfig {
    std::size_t epochs = 140;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.1;
    std::string lr_schedule = "linear_warmup"; // or "constant"
    std::size_t warmup_steps = 100;
    std::size_t effective_batch_size = 32;
    double gradient_clip_norm = 1.0;
    std::string precision = "fp32";
    std::string mode = "mle"; // or "kd"
    double alpha = 0.5;       // kd only
    std::uint64_t seed = 0;

    friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

std::string training_config_json(const TrainingConfig& config);
TrainingConfig parse_training_config(std::string_view json_text);

struct EIConfig {
    std::size_t samples_per_example = 100;
    double temperature = 0.6;
    std::size_t per_iteration_epochs = 4;
    double per_iteration_lr = 5e-5;
    TrainingConfig final_training;
    std::size_t max_iterations = 50;
    /// Continue each iteration from M_n instead of the base student.
    bool resume_from_previous = false;
    /// Resample already-covered examples too (never changes |K|).
    bool resample_covered = false;
    std::size_t max_tokens = 256;
    std::vector<std::string> stop_sequences{"\n\n", "\n#"};
    ToleranceSpec tolerance;
    std::size_t workers = 1;
    /// Where per-iteration sampling checkpoints go, if anywhere.
    std::optional<std::filesystem::path> work_dir;

    /// Throws ConfigError when a count is zero or the temperature is not positive.
    void validate() const;

    SamplingConfig sampling() const;

    /// final_training with the per-iteration epochs and fixed learning rate.
    TrainingConfig per_iteration_training() const;
};

struct EIHistoryEntry {
    std::size_t iteration = 0;
    std::size_t knowledge_size = 0;
    std::size_t new_entries = 0;

    friend bool operator==(const EIHistoryEntry&, const EIHistoryEntry&) = default;
};

struct EIState {
    std::size_t iteration = 0;
    KnowledgeSet knowledge;
    ModelRef model;      // M_n
    ModelRef base_model; // untuned student
    std::vector<EIHistoryEntry> history;
};

/// Fine-tunes a student on a knowledge set.
class Trainer {
public:
    virtual ~Trainer() = default;

    /// `init` is the checkpoint to start from; `tag` names the run (e.g.
    /// "iter-3", "final"). Throws TrainerFailure.
    virtual ModelRef train(const KnowledgeSet& knowledge, const TrainingConfig& config, const ModelRef& init,
                           std::string_view tag) = 0;
};

/// Gives a sampler for a given student checkpoint.
class StudentModels {
public:
    virtual ~StudentModels() = default;
    virtual std::shared_ptr<CompletionSampler> sampler(const ModelRef& model) = 0;
};

class MaxIterationsExceeded : public Error {
public:
    explicit MaxIterationsExceeded(EIState state);

    const EIState& state() const noexcept { return state_; }

private:
    EIState state_;
};

/// D0: few-shot acquisition from the untuned student.
KnowledgeSet bootstrap_d0(CompletionSampler& student, std::span<const SpecExample> dataset,
                          const FewShotPrompt& prompt, const EIConfig& config, std::uint64_t seed);

/// One training step then one sample-and-filter step. Newly covered
/// examples are merged in; covered examples keep their entries. With an
/// empty K_n there is nothing to train on and the state carries over.
EIState ei_step(const EIState& state, Trainer& trainer, StudentModels& students,
                std::span<const SpecExample> dataset, const EIConfig& config, std::uint64_t seed);

/// True when the knowledge set did not grow.
bool should_stop(const KnowledgeSet& previous, const KnowledgeSet& current) noexcept;

struct EIResult {
    ModelRef final_model;
    EIState state;
};

/// Bootstraps D0, iterates until should_stop, then trains M_N on K_N with
/// config.final_training. Throws MaxIterationsExceeded carrying the state
/// reached.
EIResult run_expert_iteration(std::span<const SpecExample> dataset, const FewShotPrompt& prompt, Trainer& trainer,
                              StudentModels& students, const ModelRef& base_model, const EIConfig& config,
                              std::uint64_t seed);

std::string ei_history_json(const EIState& state, const ModelRef& final_model);

/// Runs an external trainer executable per training request:
///
///     <exe> train --train-set <jsonl> --config <json> --out <dir>
///
/// and reads <dir>/manifest.json for "checkpoint_path".
class ProcessTrainer final : public Trainer {
public:
    ProcessTrainer(std::filesystem::path executable, std::filesystem::path work_dir);

    ModelRef train(const KnowledgeSet& knowledge, const TrainingConfig& config, const ModelRef& init,
                   std::string_view tag) override;

private:
    std::filesystem::path executable_;
    std::filesystem::path work_dir_;
};

/// Students served over the completion protocol; the checkpoint path (or
/// base model id) is sent as the model name.
class EndpointStudentModels final : public StudentModels {
public:
    explicit EndpointStudentModels(TeacherEndpoint endpoint);

    std::shared_ptr<CompletionSampler> sampler(const ModelRef& model) override;

private:
    TeacherEndpoint endpoint_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<CompletionSampler>> cache_;
};

/// Runs `argv` (argv[0] is looked up on PATH when it has no slash) and
/// returns its exit status, or -1 if it could not be started or was killed.
int run_process(const std::vector<std::string>& argv);

} // namespace ekt
