#include "ekt/expert_iter.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ekt/rng.hpp"
#include "ekt/util.hpp"

extern char** environ;

namespace ekt {

using nlohmann::json;

std::string training_config_json(const TrainingConfig& config)
{
    const json doc{{"epochs", config.epochs},
                   {"learning_rate", config.learning_rate},
                   {"optimizer",
                    {{"name", "adamw"},
                     {"betas", {config.adam_beta1, config.adam_beta2}},
                     {"epsilon", config.adam_epsilon}}},
                   {"weight_decay", config.weight_decay},
                   {"lr_schedule", config.lr_schedule},
                   {"warmup_steps", config.warmup_steps},
                   {"effective_batch_size", config.effective_batch_size},
                   {"gradient_clip_norm", config.gradient_clip_norm},
                   {"precision", config.precision},
                   {"mode", config.mode},
                   {"alpha", config.alpha},
                   {"seed", config.seed}};
    return doc.dump(2) + '\n';
}

TrainingConfig parse_training_config(std::string_view json_text)
{
    TrainingConfig config;
    try {
        const json doc = json::parse(json_text);
        config.epochs = doc.value("epochs", config.epochs);
        config.learning_rate = doc.value("learning_rate", config.learning_rate);
        if (doc.contains("optimizer")) {
            const auto& optimizer = doc["optimizer"];
            if (optimizer.contains("betas")) {
                config.adam_beta1 = optimizer["betas"].at(0).get<double>();
                config.adam_beta2 = optimizer["betas"].at(1).get<double>();
            }
            config.adam_epsilon = optimizer.value("epsilon", config.adam_epsilon);
        }
        config.weight_decay = doc.value("weight_decay", config.weight_decay);
        config.lr_schedule = doc.value("lr_schedule", config.lr_schedule);
        config.warmup_steps = doc.value("warmup_steps", config.warmup_steps);
        config.effective_batch_size = doc.value("effective_batch_size", config.effective_batch_size);
        config.gradient_clip_norm = doc.value("gradient_clip_norm", config.gradient_clip_norm);
        config.precision = doc.value("precision", config.precision);
        config.mode = doc.value("mode", config.mode);
        config.alpha = doc.value("alpha", config.alpha);
        config.seed = doc.value("seed", config.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    }
    if (config.mode != "mle" && config.mode != "kd") {
        throw ConfigError("training mode must be 'mle' or 'kd'");
    }
    if (config.mode == "kd" && !(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw ConfigError("distillation weight alpha must lie strictly between 0 and 1");
    }
    if (config.lr_schedule != "linear_warmup" && config.lr_schedule != "constant") {
        throw ConfigError("lr_schedule must be 'linear_warmup' or 'constant'");
    }
    return config;
}

void EIConfig::validate() const
{
    if (samples_per_example == 0 || per_iteration_epochs == 0 || max_iterations == 0 || max_tokens == 0
        || workers == 0) {
        throw ConfigError("expert iteration counts must all be at least 1");
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("expert iteration sampling temperature must be positive");
    }
    if (!(per_iteration_lr > 0.0)) {
        throw ConfigError("per-iteration learning rate must be positive");
    }
}

SamplingConfig EIConfig::sampling() const
{
    SamplingConfig sampling;
    sampling.temperature = temperature;
    sampling.num_samples = samples_per_example;
    sampling.max_tokens = max_tokens;
    sampling.stop_sequences = stop_sequences;
    sampling.greedy = false;
    return sampling;
}

TrainingConfig EIConfig::per_iteration_training() const
{
    TrainingConfig config = final_training;
    config.epochs = per_iteration_epochs;
    config.learning_rate = per_iteration_lr;
    config.lr_schedule = "constant";
    config.warmup_steps = 0;
    return config;
}

MaxIterationsExceeded::MaxIterationsExceeded(EIState state)
    : Error("expert iteration still growing after " + std::to_string(state.iteration) + " iterations (|K| = "
            + std::to_string(state.knowledge.size()) + ")")
    , state_(std::move(state))
{
}

namespace {

AcquisitionOptions acquisition_options(const EIConfig& config, std::size_t iteration)
{
    AcquisitionOptions options;
    options.tolerance = config.tolerance;
    options.workers = config.workers;
    if (config.work_dir) {
        options.checkpoint = *config.work_dir / ("iter-" + std::to_string(iteration) + ".checkpoint.jsonl");
    }
    return options;
}

} // namespace

KnowledgeSet bootstrap_d0(CompletionSampler& student, std::span<const SpecExample> dataset,
                          const FewShotPrompt& prompt, const EIConfig& config, std::uint64_t seed)
{
    config.validate();
    const auto result = acquire_knowledge(dataset, student, prompt, config.sampling(),
                                          rng::derive_seed(seed, rng::kExpertIterationStream, 0),
                                          acquisition_options(config, 0));
    spdlog::info("expert iteration: |D0| = {} of {}", result.knowledge.size(), dataset.size());
    return result.knowledge;
}

EIState ei_step(const EIState& state, Trainer& trainer, StudentModels& students,
                std::span<const SpecExample> dataset, const EIConfig& config, std::uint64_t seed)
{
    config.validate();
    EIState next = state;
    next.iteration = state.iteration + 1;

    std::vector<SpecExample> to_sample;
    for (const auto& example : dataset) {
        if (config.resample_covered || !state.knowledge.contains(example.id)) {
            to_sample.push_back(example);
        }
    }

    std::size_t added = 0;
    if (!state.knowledge.entries.empty()) {
        const ModelRef& init = config.resume_from_previous ? state.model : state.base_model;
        next.model = trainer.train(state.knowledge, config.per_iteration_training(), init,
                                   "iter-" + std::to_string(next.iteration));

        if (!to_sample.empty()) {
            auto sampler = students.sampler(next.model);
            const auto result = acquire_knowledge(
                to_sample, *sampler, zero_shot_builder(), config.sampling(),
                rng::derive_seed(seed, rng::kExpertIterationStream, next.iteration),
                acquisition_options(config, next.iteration));

            // Merge in dataset order; existing entries win.
            std::vector<KnowledgeEntry> merged;
            merged.reserve(state.knowledge.size() + result.knowledge.size());
            for (const auto& example : dataset) {
                if (const auto* existing = state.knowledge.find(example.id)) {
                    merged.push_back(*existing);
                } else if (const auto* fresh = result.knowledge.find(example.id)) {
                    merged.push_back(*fresh);
                    ++added;
                }
            }
            next.knowledge.entries = std::move(merged);
        }
    }
    next.history.push_back(EIHistoryEntry{next.iteration, next.knowledge.size(), added});
    spdlog::info("expert iteration {}: |K| = {} (+{})", next.iteration, next.knowledge.size(), added);
    return next;
}

bool should_stop(const KnowledgeSet& previous, const KnowledgeSet& current) noexcept
{
    return previous.size() == current.size();
}

EIResult run_expert_iteration(std::span<const SpecExample> dataset, const FewShotPrompt& prompt, Trainer& trainer,
                              StudentModels& students, const ModelRef& base_model, const EIConfig& config,
                              std::uint64_t seed)
{
    config.validate();
    EIState state;
    state.base_model = base_model;
    state.model = base_model;
    {
        auto base_sampler = students.sampler(base_model);
        state.knowledge = bootstrap_d0(*base_sampler, dataset, prompt, config, seed);
    }
    state.history.push_back(EIHistoryEntry{0, state.knowledge.size(), state.knowledge.size()});

    while (true) {
        if (state.iteration >= config.max_iterations) {
            throw MaxIterationsExceeded(std::move(state));
        }
        EIState next = ei_step(state, trainer, students, dataset, config, seed);
        const bool stop = should_stop(state.knowledge, next.knowledge);
        state = std::move(next);
        if (stop) {
            break;
        }
    }

    EIResult result;
    if (state.knowledge.entries.empty()) {
        spdlog::warn("expert iteration ended with an empty knowledge set; final model is the base student");
        result.final_model = base_model;
    } else {
        TrainingConfig final_config = config.final_training;
        result.final_model = trainer.train(state.knowledge, final_config, state.model, "final");
    }
    result.state = std::move(state);
    return result;
}

std::string ei_history_json(const EIState& state, const ModelRef& final_model)
{
    json history = json::array();
    for (const auto& entry : state.history) {
        history.push_back(json{{"iteration", entry.iteration},
                               {"knowledge_size", entry.knowledge_size},
                               {"new_entries", entry.new_entries}});
    }
    const json doc{{"iterations", state.iteration},
                   {"knowledge_size", state.knowledge.size()},
                   {"history", history},
                   {"final_model", {{"model_id", final_model.model_id}, {"checkpoint_path", final_model.checkpoint_path}}}};
    return doc.dump(2) + '\n';
}

// ---------------------------------------------------------------------------

int run_process(const std::vector<std::string>& argv)
{
    if (argv.empty()) {
        throw std::invalid_argument("run_process: empty argv");
    }
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& arg : argv) {
        args.push_back(const_cast<char*>(arg.c_str()));
    }
    args.push_back(nullptr);
    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(), environ);
    if (rc != 0) {
        spdlog::error("cannot start {}: {}", argv[0], std::strerror(rc));
        return -1;
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) {
            return -1;
        }
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ProcessTrainer::ProcessTrainer(std::filesystem::path executable, std::filesystem::path work_dir)
    : executable_(std::move(executable))
    , work_dir_(std::move(work_dir))
{
}

ModelRef ProcessTrainer::train(const KnowledgeSet& knowledge, const TrainingConfig& config, const ModelRef& init,
                               std::string_view tag)
{
    const auto run_dir = work_dir_ / std::string(tag);
    std::filesystem::create_directories(run_dir);
    const auto train_set = run_dir / "train_set.jsonl";
    const auto config_path = run_dir / "train_config.json";
    const auto out_dir = run_dir / "checkpoint";
    save_knowledge_set(knowledge, train_set);

    json config_doc = json::parse(training_config_json(config));
    config_doc["base_model"] = init.model_id;
    config_doc["init_checkpoint"] = init.checkpoint_path;
    util::write_text_atomic(config_path, config_doc.dump(2) + '\n');

    const int status = run_process({executable_.string(), "train", "--train-set", train_set.string(), "--config",
                                    config_path.string(), "--out", out_dir.string()});
    if (status != 0) {
        throw TrainerFailure("trainer " + executable_.string() + " exited with status " + std::to_string(status)
                             + " for " + std::string(tag));
    }
    const auto manifest_path = out_dir / "manifest.json";
    json manifest;
    try {
        manifest = json::parse(util::read_text(manifest_path));
    } catch (const json::exception& e) {
        throw TrainerFailure("unreadable trainer manifest " + manifest_path.string() + ": " + e.what());
    } catch (const IoFailure& e) {
        throw TrainerFailure(std::string("trainer wrote no manifest: ") + e.what());
    }
    if (!manifest.contains("checkpoint_path") || !manifest["checkpoint_path"].is_string()) {
        throw TrainerFailure("trainer manifest " + manifest_path.string() + " has no checkpoint_path");
    }
    const auto checkpoint = manifest["checkpoint_path"].get<std::string>();
    return ModelRef{checkpoint, checkpoint};
}

EndpointStudentModels::EndpointStudentModels(TeacherEndpoint endpoint)
    : endpoint_(std::move(endpoint))
{
}

std::shared_ptr<CompletionSampler> EndpointStudentModels::sampler(const ModelRef& model)
{
    const std::lock_guard lock(mutex_);
    auto& slot = cache_[model.model_id];
    if (!slot) {
        TeacherEndpoint endpoint = endpoint_;
        endpoint.model_id = model.model_id;
        slot = std::make_shared<HttpCompletionClient>(endpoint);
    }
    return slot;
}

} // namespace ekt
