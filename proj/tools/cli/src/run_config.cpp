#include "ekt/cli/run_config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "ekt/errors.hpp"
#include "ekt/rng.hpp"
#include "ekt/util.hpp"

#ifndef EKT_VERSION
#define EKT_VERSION "0.0.0"
#endif

namespace ekt::cli {

using nlohmann::json;

namespace {

void check_keys(const json& object, const std::set<std::string>& allowed, const std::string& where)
{
    if (!object.is_object()) {
        throw ConfigError(where + " must be a JSON object");
    }
    for (const auto& [key, value] : object.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& object, const char* key, T fallback, const std::string& where)
{
    const auto it = object.find(key);
    if (it == object.end() || it->is_null()) {
        return fallback;
    }
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) {
                throw ConfigError(where + "." + key + " must be true or false");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_unsigned()) {
                throw ConfigError(where + "." + key + " must be a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) {
                throw ConfigError(where + "." + key + " must be a number");
            }
        } else {
            if (!it->is_string()) {
                throw ConfigError(where + "." + key + " must be a string");
            }
        }
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& value)
{
    const std::filesystem::path path(value);
    return path.is_absolute() ? path : base_dir / path;
}

std::filesystem::path existing_file(const std::filesystem::path& base_dir, const std::string& value,
                                    const std::string& what)
{
    auto path = resolve(base_dir, value);
    if (!std::filesystem::exists(path)) {
        throw ConfigError(what + " '" + path.string() + "' does not exist");
    }
    return path;
}

GeneratorSpec parse_generator(const json& spec, const std::string& where)
{
    if (spec.contains("texts")) {
        check_keys(spec, {"texts"}, where);
        if (!spec["texts"].is_array() || spec["texts"].empty()) {
            throw ConfigError(where + ".texts must be a non-empty array of strings");
        }
        FixedTexts fixed;
        for (const auto& text : spec["texts"]) {
            if (!text.is_string()) {
                throw ConfigError(where + ".texts must contain strings");
            }
            fixed.texts.push_back(text.get<std::string>());
        }
        return fixed;
    }
    check_keys(spec, {"correct_program", "correct_probability", "decoy_program"}, where);
    StochasticProgram program;
    program.correct_program = get_or<std::string>(spec, "correct_program", "", where);
    program.correct_probability = get_or<double>(spec, "correct_probability", 0.0, where);
    program.decoy_program = get_or<std::string>(spec, "decoy_program", "", where);
    if (!(program.correct_probability >= 0.0 && program.correct_probability <= 1.0)) {
        throw ConfigError(where + ".correct_probability must lie in [0, 1]");
    }
    return program;
}

SamplerSettings parse_sampler(const json& doc, const std::filesystem::path& base_dir, const std::string& where)
{
    if (!doc.is_object()) {
        throw ConfigError(where + " must be a JSON object");
    }
    SamplerSettings settings;
    const std::string kind = get_or<std::string>(doc, "kind", "http", where);
    if (kind == "mock") {
        check_keys(doc, {"kind", "model_id", "correct_probability", "decoy_program", "script", "latency_ms"}, where);
        settings.kind = SamplerSettings::Kind::Mock;
        settings.mock_model_id = get_or<std::string>(doc, "model_id", settings.mock_model_id, where);
        if (doc.contains("correct_probability")) {
            const double p = get_or<double>(doc, "correct_probability", 0.0, where);
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ConfigError(where + ".correct_probability must lie in [0, 1]");
            }
            settings.default_correct_probability = p;
        }
        if (doc.contains("decoy_program")) {
            settings.default_decoy_program = get_or<std::string>(doc, "decoy_program", "", where);
        }
        settings.latency_ms = static_cast<std::int64_t>(get_or<std::uint64_t>(doc, "latency_ms", 0, where));
        if (doc.contains("script")) {
            if (!doc["script"].is_object()) {
                throw ConfigError(where + ".script must map example ids to generator specs");
            }
            for (const auto& [id, spec] : doc["script"].items()) {
                settings.mock_script.emplace(id, parse_generator(spec, where + ".script." + id));
            }
        }
        return settings;
    }
    if (kind != "http") {
        throw ConfigError(where + ".kind must be 'http' or 'mock'");
    }
    check_keys(doc,
               {"kind", "base_url", "model_id", "auth_token_env", "require_auth", "max_in_flight",
                "max_samples_per_request", "timeout_s", "retry", "audit_log"},
               where);
    auto& endpoint = settings.endpoint;
    endpoint.base_url = get_or<std::string>(doc, "base_url", "", where);
    if (endpoint.base_url.empty()) {
        throw ConfigError(where + ".base_url is required");
    }
    try {
        split_base_url(endpoint.base_url);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ".base_url: " + e.what());
    }
    endpoint.model_id = get_or<std::string>(doc, "model_id", "", where);
    if (endpoint.model_id.empty()) {
        throw ConfigError(where + ".model_id is required");
    }
    endpoint.auth_token_env = get_or<std::string>(doc, "auth_token_env", endpoint.auth_token_env, where);
    endpoint.require_auth = get_or<bool>(doc, "require_auth", endpoint.require_auth, where);
    endpoint.max_in_flight = get_or<std::size_t>(doc, "max_in_flight", endpoint.max_in_flight, where);
    endpoint.max_samples_per_request
        = get_or<std::size_t>(doc, "max_samples_per_request", endpoint.max_samples_per_request, where);
    endpoint.timeout = std::chrono::seconds(get_or<std::uint64_t>(doc, "timeout_s", 120, where));
    if (endpoint.max_in_flight == 0 || endpoint.max_samples_per_request == 0) {
        throw ConfigError(where + ": max_in_flight and max_samples_per_request must be at least 1");
    }
    if (doc.contains("retry")) {
        const auto& retry = doc["retry"];
        check_keys(retry, {"max_retries", "base_backoff_ms", "backoff_multiplier"}, where + ".retry");
        endpoint.retry_policy.max_retries
            = get_or<std::size_t>(retry, "max_retries", endpoint.retry_policy.max_retries, where + ".retry");
        endpoint.retry_policy.base_backoff = std::chrono::milliseconds(
            get_or<std::uint64_t>(retry, "base_backoff_ms", 500, where + ".retry"));
        endpoint.retry_policy.backoff_multiplier
            = get_or<double>(retry, "backoff_multiplier", endpoint.retry_policy.backoff_multiplier, where + ".retry");
        if (!(endpoint.retry_policy.backoff_multiplier >= 1.0)) {
            throw ConfigError(where + ".retry.backoff_multiplier must be at least 1");
        }
    }
    if (doc.contains("audit_log")) {
        settings.audit_log = resolve(base_dir, get_or<std::string>(doc, "audit_log", "", where));
    }
    return settings;
}

SamplingConfig parse_sampling(const json& doc)
{
    const std::string where = "sampling";
    check_keys(doc, {"temperature", "num_samples", "max_tokens", "stop", "greedy"}, where);
    SamplingConfig sampling;
    sampling.greedy = get_or<bool>(doc, "greedy", false, where);
    if (sampling.greedy) {
        sampling = SamplingConfig::greedy_decoding();
    }
    sampling.temperature = get_or<double>(doc, "temperature", sampling.temperature, where);
    sampling.num_samples = get_or<std::size_t>(doc, "num_samples", sampling.num_samples, where);
    sampling.max_tokens = get_or<std::size_t>(doc, "max_tokens", sampling.max_tokens, where);
    if (doc.contains("stop")) {
        try {
            sampling.stop_sequences = doc["stop"].get<std::vector<std::string>>();
        } catch (const json::exception&) {
            throw ConfigError("sampling.stop must be an array of strings");
        }
    }
    try {
        sampling.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("sampling: ") + e.what());
    }
    return sampling;
}

TrainingConfig parse_training(const json& doc, std::uint64_t seed)
{
    json copy = doc;
    if (!copy.contains("seed")) {
        copy["seed"] = seed;
    }
    return parse_training_config(copy.dump());
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value_text)
{
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted_key.find('.', start);
        const std::string key = dotted_key.substr(start, dot - start);
        if (dot == std::string::npos) {
            json value;
            try {
                value = json::parse(value_text);
            } catch (const json::parse_error&) {
                value = value_text;
            }
            (*node)[key] = value;
            return;
        }
        if (!node->contains(key) || !(*node)[key].is_object()) {
            (*node)[key] = json::object();
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

} // namespace

std::string SamplerSettings::model_id() const
{
    return kind == Kind::Mock ? mock_model_id : endpoint.model_id;
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(doc,
               {"seed", "dataset", "validation_size", "include_validation", "prompt", "output_dir", "tolerance",
                "sampling", "teacher", "workers", "keep_all_correct", "expert_iteration"},
               "config");

    RunConfig config;
    if (!doc.contains("seed")) {
        throw ConfigError("config.seed is required; runs never fall back to a clock-derived seed");
    }
    config.seed = get_or<std::uint64_t>(doc, "seed", 0, "config");
    const auto dataset = get_or<std::string>(doc, "dataset", "", "config");
    if (dataset.empty()) {
        throw ConfigError("config.dataset is required");
    }
    config.dataset = existing_file(base_dir, dataset, "dataset");
    config.validation_size = get_or<std::size_t>(doc, "validation_size", config.validation_size, "config");
    config.include_validation = get_or<bool>(doc, "include_validation", false, "config");
    if (doc.contains("prompt")) {
        config.prompt = existing_file(base_dir, get_or<std::string>(doc, "prompt", "", "config"), "prompt file");
    }
    config.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "run", "config"));
    if (doc.contains("tolerance")) {
        const auto& tolerance = doc["tolerance"];
        check_keys(tolerance, {"atol", "rtol"}, "tolerance");
        config.tolerance.atol = get_or<double>(tolerance, "atol", config.tolerance.atol, "tolerance");
        config.tolerance.rtol = get_or<double>(tolerance, "rtol", config.tolerance.rtol, "tolerance");
        if (config.tolerance.atol < 0.0 || config.tolerance.rtol < 0.0) {
            throw ConfigError("tolerance values must be non-negative");
        }
    }
    config.sampling = parse_sampling(doc.value("sampling", json::object()));
    if (doc.contains("teacher")) {
        config.teacher = parse_sampler(doc["teacher"], base_dir, "teacher");
    }
    config.workers = get_or<std::size_t>(doc, "workers", config.workers, "config");
    if (config.workers == 0) {
        throw ConfigError("config.workers must be at least 1");
    }
    config.keep_all_correct = get_or<bool>(doc, "keep_all_correct", false, "config");

    if (doc.contains("expert_iteration")) {
        const auto& ei = doc["expert_iteration"];
        const std::string where = "expert_iteration";
        check_keys(ei,
                   {"base_model", "student", "samples_per_example", "temperature", "per_iteration_epochs",
                    "per_iteration_lr", "max_iterations", "resume_from_previous", "resample_covered",
                    "final_training"},
                   where);
        ExpertIterationSettings settings;
        settings.base_model = get_or<std::string>(ei, "base_model", settings.base_model, where);
        if (!ei.contains("student")) {
            throw ConfigError("expert_iteration.student is required");
        }
        settings.student = parse_sampler(ei["student"], base_dir, where + ".student");
        auto& c = settings.config;
        c.samples_per_example = get_or<std::size_t>(ei, "samples_per_example", c.samples_per_example, where);
        c.temperature = get_or<double>(ei, "temperature", c.temperature, where);
        c.per_iteration_epochs = get_or<std::size_t>(ei, "per_iteration_epochs", c.per_iteration_epochs, where);
        c.per_iteration_lr = get_or<double>(ei, "per_iteration_lr", c.per_iteration_lr, where);
        c.max_iterations = get_or<std::size_t>(ei, "max_iterations", c.max_iterations, where);
        c.resume_from_previous = get_or<bool>(ei, "resume_from_previous", false, where);
        c.resample_covered = get_or<bool>(ei, "resample_covered", false, where);
        c.final_training = parse_training(ei.value("final_training", json::object()), config.seed);
        c.max_tokens = config.sampling.max_tokens;
        c.stop_sequences = config.sampling.stop_sequences;
        c.tolerance = config.tolerance;
        c.workers = config.workers;
        c.validate();
        config.expert_iteration = std::move(settings);
    }
    config.resolved_json = doc.dump();
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides)
{
    std::string text;
    try {
        text = util::read_text(path);
    } catch (const IoFailure& e) {
        throw ConfigError(e.what());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
    for (const auto& [key, value] : overrides) {
        apply_override(doc, key, value);
    }
    return parse_run_config(doc.dump(), path.parent_path().empty() ? "." : path.parent_path());
}

std::unique_ptr<CompletionSampler> make_sampler(const SamplerSettings& settings, std::uint64_t seed,
                                                std::span<const SpecExample> examples)
{
    if (settings.kind == SamplerSettings::Kind::Http) {
        return std::make_unique<HttpCompletionClient>(settings.endpoint, nullptr,
                                                      settings.audit_log.value_or(std::filesystem::path{}));
    }
    auto script = settings.mock_script;
    if (settings.default_correct_probability) {
        for (const auto& example : examples) {
            if (script.contains(example.id)) {
                continue;
            }
            StochasticProgram program;
            program.correct_program = "answer = " + util::format_real(example.answer);
            program.correct_probability = *settings.default_correct_probability;
            program.decoy_program = settings.default_decoy_program.value_or(
                "answer = " + util::format_real(example.answer + 1.0));
            script.emplace(example.id, std::move(program));
        }
    }
    auto mock = std::make_unique<MockTeacher>(std::move(script), seed, settings.mock_model_id);
    mock->set_latency(std::chrono::milliseconds(settings.latency_ms));
    return mock;
}

FewShotPrompt resolve_prompt(const RunConfig& config)
{
    return config.prompt ? load_few_shot_prompt(*config.prompt) : default_few_shot_prompt();
}

std::vector<SpecExample> select_examples(const RunConfig& config, const std::vector<SpecExample>& dataset)
{
    if (config.include_validation) {
        return dataset;
    }
    return split_dataset(dataset, config.validation_size, config.seed).train;
}

std::string run_meta_json(std::string_view command, const RunConfig& config)
{
    const json doc{
        {"command", command},
        {"config_hash", util::hex64(util::fnv1a64(config.resolved_json))},
        {"config", json::parse(config.resolved_json)},
        {"seeds",
         {{"top", config.seed},
          {"split", rng::derive_seed(config.seed, rng::kSplitStream)},
          {"acquisition_selection", rng::derive_seed(config.seed, rng::kSelectionStream)},
          {"mock_teacher", rng::derive_seed(config.seed, rng::kMockTeacherStream)},
          {"expert_iteration", rng::derive_seed(config.seed, rng::kExpertIterationStream)}}},
        {"versions",
         {{"ekt", EKT_VERSION}, {"knowledge_format", 1}, {"sample_format", 1}, {"checkpoint_format", 1}}},
    };
    return doc.dump(2) + '\n';
}

} // namespace ekt::cli
