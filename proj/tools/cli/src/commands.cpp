#include "ekt/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ekt/cli/run_config.hpp"
#include "ekt/dataset.hpp"
#include "ekt/evaluator.hpp"
#include "ekt/expert_iter.hpp"
#include "ekt/knowledge.hpp"
#include "ekt/mwp_lang.hpp"
#include "ekt/util.hpp"
#include "ekt/verifier.hpp"

namespace ekt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
    }
}

std::vector<std::size_t> parse_k_list(const std::string& text)
{
    std::vector<std::size_t> ks;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        const auto trimmed = util::trim(item);
        std::size_t k = 0;
        const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), k);
        if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size() || k == 0) {
            throw ConfigError("--k expects a comma-separated list of positive integers, got '" + text + "'");
        }
        ks.push_back(k);
    }
    if (ks.empty()) {
        throw ConfigError("--k is empty");
    }
    return ks;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string in;
    std::string out;
    std::size_t validation_size = 500;
    std::uint64_t seed = 0;
};

int cmd_ingest(const IngestArgs& args, std::ostream& out)
{
    const auto examples = load_dataset(args.in);
    if (examples.empty()) {
        throw InvariantViolation("no usable records in " + args.in);
    }
    const fs::path out_path(args.out);
    if (out_path.has_parent_path()) {
        ensure_dir(out_path.parent_path());
    }
    save_dataset(out_path, examples);
    const auto split = split_dataset(examples, args.validation_size, args.seed);

    json train_ids = json::array();
    json validation_ids = json::array();
    for (const auto& e : split.train) {
        train_ids.push_back(e.id);
    }
    for (const auto& e : split.validation) {
        validation_ids.push_back(e.id);
    }
    const json manifest{{"seed", args.seed},
                        {"validation_size", args.validation_size},
                        {"dataset_fingerprint", dataset_fingerprint(examples)},
                        {"train_ids", train_ids},
                        {"validation_ids", validation_ids}};
    auto manifest_path = out_path;
    manifest_path.replace_extension(".split.json");
    util::write_text_atomic(manifest_path, manifest.dump(2) + '\n');

    out << "ingested " << examples.size() << " examples (" << split.train.size() << " train, "
        << split.validation.size() << " validation) -> " << out_path.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct AcquireFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<std::size_t> num_samples;
    std::optional<double> temperature;
    std::optional<std::size_t> workers;
    bool include_validation = false;
    bool keep_all_correct = false;
};

std::map<std::string, std::string> overrides_from(const AcquireFlags& flags)
{
    std::map<std::string, std::string> overrides;
    if (flags.seed) {
        overrides["seed"] = std::to_string(*flags.seed);
    }
    if (flags.output_dir) {
        overrides["output_dir"] = json(*flags.output_dir).dump();
    }
    if (flags.num_samples) {
        overrides["sampling.num_samples"] = std::to_string(*flags.num_samples);
    }
    if (flags.temperature) {
        overrides["sampling.temperature"] = json(*flags.temperature).dump();
    }
    if (flags.workers) {
        overrides["workers"] = std::to_string(*flags.workers);
    }
    if (flags.include_validation) {
        overrides["include_validation"] = "true";
    }
    if (flags.keep_all_correct) {
        overrides["keep_all_correct"] = "true";
    }
    return overrides;
}

int cmd_acquire(const AcquireFlags& flags, std::ostream& out)
{
    const RunConfig config = load_run_config(flags.config, overrides_from(flags));
    const auto dataset = load_dataset(config.dataset);
    const auto examples = select_examples(config, dataset);
    if (examples.empty()) {
        throw InvariantViolation("no examples to sample from after the validation split");
    }
    const auto prompt = resolve_prompt(config);
    ensure_dir(config.output_dir);
    util::write_text_atomic(config.output_dir / "run-meta.json", run_meta_json("acquire", config));

    auto sampler = make_sampler(config.teacher, config.seed, examples);
    AcquisitionOptions options;
    options.tolerance = config.tolerance;
    options.checkpoint = config.output_dir / "acquire.checkpoint.jsonl";
    options.keep_all_correct = config.keep_all_correct;
    options.workers = config.workers;
    const auto result = acquire_knowledge(examples, *sampler, prompt, config.sampling, config.seed, options);

    save_knowledge_set(result.knowledge, config.output_dir / "knowledge.jsonl");
    util::write_text_atomic(config.output_dir / "coverage.json", coverage_report_json(result.report));
    if (config.keep_all_correct) {
        save_entries(result.knowledge.meta, result.all_correct, config.output_dir / "all_correct.jsonl");
    }
    out << "knowledge set: " << result.knowledge.size() << " entries, coverage " << result.report.covered << "/"
        << result.report.total << " (" << std::fixed << std::setprecision(1) << 100.0 * result.report.fraction
        << "%) -> " << (config.output_dir / "knowledge.jsonl").string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::string program;
    double answer = 0.0;
    double atol = ToleranceSpec{}.atol;
    double rtol = ToleranceSpec{}.rtol;
};

int cmd_verify(const VerifyArgs& args, std::ostream& out)
{
    std::string source;
    if (args.program == "-") {
        std::ostringstream buffer;
        buffer << std::cin.rdbuf();
        source = buffer.str();
    } else {
        source = util::read_text(args.program);
    }
    if (!std::isfinite(args.answer)) {
        throw ConfigError("--answer must be finite");
    }
    const auto outcome = verify(source, args.answer, ToleranceSpec{args.atol, args.rtol});
    json doc{{"status", std::string(to_string(outcome.status))}, {"detail", outcome.detail}};
    doc["produced_value"] = outcome.produced_value ? json(*outcome.produced_value) : json(nullptr);
    out << doc.dump() << '\n';
    return is_correct(outcome) ? kOk : kInvalidInput;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string samples;
    std::string dataset;
    std::string k = "1";
    std::string estimator = "empirical";
    std::optional<std::string> out;
    double atol = ToleranceSpec{}.atol;
    double rtol = ToleranceSpec{}.rtol;
};

int cmd_eval(const EvalArgs& args, std::ostream& out)
{
    const auto ks = parse_k_list(args.k);
    PassAtKEstimator estimator{};
    try {
        estimator = parse_estimator(args.estimator);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto file = load_sample_file(args.samples);
    if (file.samples.empty()) {
        throw InvariantViolation("no samples in " + args.samples);
    }
    const auto dataset = load_dataset(args.dataset);
    const ArithmeticChecker checker(ToleranceSpec{args.atol, args.rtol});
    auto results = evaluate_samples(file.samples, dataset, checker);
    const auto report = build_report(std::move(results), ks, estimator, file.meta.decode_mode);
    const std::string text = eval_report_json(report);
    if (args.out) {
        const fs::path out_path(*args.out);
        if (out_path.has_parent_path()) {
            ensure_dir(out_path.parent_path());
        }
        util::write_text_atomic(out_path, text);
        for (const auto& [k, value] : report.pass_at_k) {
            out << "pass@" << k << " = " << std::fixed << std::setprecision(4) << value << '\n';
        }
    } else {
        out << text;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

class SharedSamplerModels final : public StudentModels {
public:
    explicit SharedSamplerModels(std::shared_ptr<CompletionSampler> sampler)
        : sampler_(std::move(sampler))
    {
    }

    std::shared_ptr<CompletionSampler> sampler(const ModelRef&) override { return sampler_; }

private:
    std::shared_ptr<CompletionSampler> sampler_;
};

struct ExpertIterArgs {
    std::string config;
    std::string trainer;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
};

int cmd_expert_iter(const ExpertIterArgs& args, std::ostream& out, std::ostream& err)
{
    std::map<std::string, std::string> overrides;
    if (args.seed) {
        overrides["seed"] = std::to_string(*args.seed);
    }
    if (args.output_dir) {
        overrides["output_dir"] = json(*args.output_dir).dump();
    }
    RunConfig config = load_run_config(args.config, overrides);
    if (!config.expert_iteration) {
        throw ConfigError("config has no 'expert_iteration' section");
    }
    auto& ei = *config.expert_iteration;
    const auto dataset = load_dataset(config.dataset);
    const auto examples = select_examples(config, dataset);
    if (examples.empty()) {
        throw InvariantViolation("no examples to train on after the validation split");
    }
    const auto prompt = resolve_prompt(config);
    ensure_dir(config.output_dir);
    util::write_text_atomic(config.output_dir / "run-meta.json", run_meta_json("expert-iter", config));

    const auto work_dir = config.output_dir / "ei";
    ensure_dir(work_dir);
    ei.config.work_dir = work_dir;

    std::unique_ptr<StudentModels> students;
    if (ei.student.kind == SamplerSettings::Kind::Mock) {
        students = std::make_unique<SharedSamplerModels>(make_sampler(ei.student, config.seed, examples));
    } else {
        students = std::make_unique<EndpointStudentModels>(ei.student.endpoint);
    }
    ProcessTrainer trainer(args.trainer, work_dir);
    const ModelRef base{ei.base_model, ""};

    try {
        const auto result = run_expert_iteration(examples, prompt, trainer, *students, base, ei.config, config.seed);
        util::write_text_atomic(config.output_dir / "history.json", ei_history_json(result.state, result.final_model));
        save_knowledge_set(result.state.knowledge, config.output_dir / "knowledge.jsonl");
        const json manifest{{"model_id", result.final_model.model_id},
                            {"checkpoint_path", result.final_model.checkpoint_path}};
        util::write_text_atomic(config.output_dir / "final-manifest.json", manifest.dump(2) + '\n');
        out << "expert iteration stopped after " << result.state.iteration << " iteration(s), |K| = "
            << result.state.knowledge.size() << "; final model " << result.final_model.model_id << '\n';
        return kOk;
    } catch (const MaxIterationsExceeded& e) {
        util::write_text_atomic(config.output_dir / "history.json", ei_history_json(e.state(), e.state().model));
        save_knowledge_set(e.state().knowledge, config.output_dir / "knowledge.jsonl");
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    }
}

// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string knowledge;
    std::optional<std::string> coverage;
};

int cmd_report(const ReportArgs& args, std::ostream& out)
{
    const auto knowledge = load_knowledge_set(args.knowledge);
    std::optional<CoverageReport> report;
    fs::path coverage_path = args.coverage ? fs::path(*args.coverage) : fs::path(args.knowledge).parent_path() / "coverage.json";
    if (fs::exists(coverage_path)) {
        report = parse_coverage_report(util::read_text(coverage_path));
    } else if (args.coverage) {
        throw IoFailure("coverage report " + coverage_path.string() + " does not exist");
    }

    std::vector<std::size_t> lengths;
    for (const auto& entry : knowledge.entries) {
        lengths.push_back(lang::parse_program(entry.program).statements().size());
    }
    std::sort(lengths.begin(), lengths.end());

    auto row = [&out](std::string_view label, const std::string& value) {
        out << std::left << std::setw(20) << label << value << '\n';
    };
    std::ostringstream temperature;
    temperature << knowledge.meta.temperature;
    row("knowledge set", args.knowledge);
    row("teacher", knowledge.meta.teacher_id);
    row("temperature", temperature.str());
    row("samples/example", std::to_string(knowledge.meta.num_samples));
    row("seed", std::to_string(knowledge.meta.seed));
    row("dataset", knowledge.meta.dataset_fingerprint);
    row("entries", std::to_string(knowledge.size()));
    if (report) {
        std::ostringstream value;
        value << report->covered << " / " << report->total << " (" << std::fixed << std::setprecision(1)
              << 100.0 * (report->total == 0 ? 0.0 : coverage(*report)) << "%)";
        row("coverage", value.str());
        std::size_t samples = 0;
        std::size_t correct = 0;
        for (const auto& [id, counts] : report->per_example) {
            samples += counts.num_samples;
            correct += counts.num_correct;
        }
        if (samples > 0) {
            std::ostringstream rate;
            rate << correct << " / " << samples << " (" << std::fixed << std::setprecision(2)
                 << 100.0 * static_cast<double>(correct) / static_cast<double>(samples) << "%)";
            row("correct samples", rate.str());
        }
    }
    if (!lengths.empty()) {
        row("program statements", "min " + std::to_string(lengths.front()) + " / median "
                                      + std::to_string(lengths[lengths.size() / 2]) + " / max "
                                      + std::to_string(lengths.back()));
    }
    return kOk;
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) != nullptr || dynamic_cast<const IoFailure*>(&e) != nullptr) {
        return kConfigInvalid;
    }
    if (dynamic_cast<const EndpointError*>(&e) != nullptr || dynamic_cast<const TrainerFailure*>(&e) != nullptr) {
        return kEndpointFailure;
    }
    if (dynamic_cast<const InputError*>(&e) != nullptr || dynamic_cast<const lang::ParseError*>(&e) != nullptr) {
        return kInvalidInput;
    }
    return kInvalidInput;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Knowledge-set acquisition, verification and pass@k evaluation for straight-line math programs",
                 "ekt"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Canonicalize a GSM8k-style JSONL file and write a split manifest");
    ingest_cmd->add_option("--in", ingest.in, "Raw JSONL (question, answer)")->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--out", ingest.out, "Canonical dataset JSONL")->required();
    ingest_cmd->add_option("--validation-size", ingest.validation_size, "Held-out examples")->capture_default_str();
    ingest_cmd->add_option("--seed", ingest.seed, "Split seed")->capture_default_str();

    AcquireFlags acquire;
    auto* acquire_cmd = app.add_subcommand("acquire", "Sample from the teacher and build a knowledge set (resumable)");
    acquire_cmd->add_option("--config", acquire.config, "Run config JSON")->required();
    acquire_cmd->add_option("--seed", acquire.seed, "Override config seed");
    acquire_cmd->add_option("--output-dir", acquire.output_dir, "Override output directory");
    acquire_cmd->add_option("--num-samples", acquire.num_samples, "Override samples per example");
    acquire_cmd->add_option("--temperature", acquire.temperature, "Override sampling temperature");
    acquire_cmd->add_option("--workers", acquire.workers, "Examples sampled concurrently");
    acquire_cmd->add_flag("--include-validation", acquire.include_validation, "Sample validation examples too");
    acquire_cmd->add_flag("--keep-all-correct", acquire.keep_all_correct, "Also write every correct sample");

    VerifyArgs verify_args;
    auto* verify_cmd = app.add_subcommand("verify", "Run one program and compare with an answer");
    verify_cmd->add_option("--program", verify_args.program, "Program file, or - for stdin")->required();
    verify_cmd->add_option("--answer", verify_args.answer, "Expected answer")->required();
    verify_cmd->add_option("--atol", verify_args.atol, "Absolute tolerance")->capture_default_str();
    verify_cmd->add_option("--rtol", verify_args.rtol, "Relative tolerance")->capture_default_str();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Compute pass@k for a sample file");
    eval_cmd->add_option("--samples", eval.samples, "Sample JSONL")->required();
    eval_cmd->add_option("--dataset", eval.dataset, "Canonical dataset JSONL")->required();
    eval_cmd->add_option("--k", eval.k, "Comma-separated k values")->capture_default_str();
    eval_cmd->add_option("--estimator", eval.estimator, "empirical or unbiased")
        ->check(CLI::IsMember({"empirical", "unbiased"}))
        ->capture_default_str();
    eval_cmd->add_option("--out", eval.out, "Write the report here instead of stdout");
    eval_cmd->add_option("--atol", eval.atol, "Absolute tolerance")->capture_default_str();
    eval_cmd->add_option("--rtol", eval.rtol, "Relative tolerance")->capture_default_str();

    ExpertIterArgs expert;
    auto* expert_cmd = app.add_subcommand("expert-iter", "Run the expert-iteration baseline");
    expert_cmd->add_option("--config", expert.config, "Run config JSON with an expert_iteration section")->required();
    expert_cmd->add_option("--trainer", expert.trainer, "Trainer executable")->required();
    expert_cmd->add_option("--seed", expert.seed, "Override config seed");
    expert_cmd->add_option("--output-dir", expert.output_dir, "Override output directory");

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Summarize a knowledge set");
    report_cmd->add_option("--knowledge", report.knowledge, "Knowledge-set JSONL")->required();
    report_cmd->add_option("--coverage", report.coverage, "Coverage report (default: coverage.json next to it)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*ingest_cmd) {
            return cmd_ingest(ingest, out);
        }
        if (*acquire_cmd) {
            return cmd_acquire(acquire, out);
        }
        if (*verify_cmd) {
            return cmd_verify(verify_args, out);
        }
        if (*eval_cmd) {
            return cmd_eval(eval, out);
        }
        if (*expert_cmd) {
            return cmd_expert_iter(expert, out, err);
        }
        if (*report_cmd) {
            return cmd_report(report, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kUsage;
}

} // namespace ekt::cli
