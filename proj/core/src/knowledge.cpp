#include "ekt/knowledge.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ekt/errors.hpp"
#include "ekt/mwp_lang.hpp"
#include "ekt/rng.hpp"
#include "ekt/util.hpp"

namespace ekt {

using nlohmann::json;

bool KnowledgeSet::contains(std::string_view example_id) const noexcept
{
    return find(example_id) != nullptr;
}

const KnowledgeEntry* KnowledgeSet::find(std::string_view example_id) const noexcept
{
    const auto it = std::find_if(entries.begin(), entries.end(),
                                 [&](const KnowledgeEntry& e) { return e.example_id == example_id; });
    return it == entries.end() ? nullptr : &*it;
}

double coverage(const CoverageReport& report)
{
    if (report.total == 0) {
        throw EmptyDataset("coverage of an empty dataset is undefined");
    }
    return static_cast<double>(report.covered) / static_cast<double>(report.total);
}

std::size_t select_correct_sample(std::size_t num_correct, std::uint64_t seed, std::string_view example_id)
{
    const std::uint64_t stream = rng::derive_seed(seed, rng::kSelectionStream);
    auto engine = rng::make_engine(util::fnv1a64(example_id, stream));
    return static_cast<std::size_t>(rng::uniform_index(engine, num_correct));
}

namespace {

// Append-only log of raw completions per example. The first line identifies
// the configuration that produced it; a trailing partial line (process killed
// mid-write) is discarded on reopen.
class CompletionCheckpoint {
public:
    CompletionCheckpoint(const std::filesystem::path& path, const json& signature)
        : path_(path)
    {
        std::vector<std::string> kept;
        if (std::filesystem::exists(path_)) {
            kept = replay(signature);
        }
        if (kept.empty()) {
            kept.push_back(json{{"type", "meta"}, {"signature", signature}}.dump());
        }
        std::string content;
        for (const auto& line : kept) {
            content += line;
            content += '\n';
        }
        util::write_text_atomic(path_, content);
        out_.open(path_, std::ios::app | std::ios::binary);
        if (!out_) {
            throw IoFailure("cannot append to checkpoint " + path_.string());
        }
    }

    const std::vector<std::string>* completions(const std::string& example_id) const
    {
        const auto it = replayed_.find(example_id);
        return it == replayed_.end() ? nullptr : &it->second;
    }

    std::size_t replayed_count() const noexcept { return replayed_.size(); }

    void record(const std::string& example_id, const std::vector<std::string>& completions)
    {
        const std::string line = json{{"type", "example"}, {"example_id", example_id}, {"completions", completions}}.dump();
        const std::lock_guard lock(mutex_);
        out_ << line << '\n';
        out_.flush();
        if (!out_) {
            throw IoFailure("write failed for checkpoint " + path_.string());
        }
    }

private:
    std::vector<std::string> replay(const json& signature)
    {
        std::ifstream in(path_, std::ios::binary);
        if (!in) {
            throw IoFailure("cannot open checkpoint " + path_.string());
        }
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            lines.push_back(line);
        }
        std::vector<std::string> kept;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const bool last = i + 1 == lines.size();
            if (util::trim(lines[i]).empty()) {
                continue;
            }
            json record;
            try {
                record = json::parse(lines[i]);
            } catch (const json::parse_error&) {
                if (last) {
                    spdlog::warn("checkpoint {}: dropping truncated final record", path_.string());
                    break;
                }
                throw SchemaViolation("checkpoint " + path_.string() + " line " + std::to_string(i + 1)
                                      + " is not JSON");
            }
            if (kept.empty()) {
                if (record.value("type", "") != "meta" || !record.contains("signature")) {
                    throw SchemaViolation("checkpoint " + path_.string() + " has no meta line");
                }
                if (record["signature"] != signature) {
                    throw ConfigError("checkpoint " + path_.string()
                                      + " was written by a different acquisition configuration");
                }
                kept.push_back(lines[i]);
                continue;
            }
            if (record.value("type", "") != "example" || !record.contains("example_id")
                || !record["example_id"].is_string() || !record.contains("completions")
                || !record["completions"].is_array()) {
                throw SchemaViolation("checkpoint " + path_.string() + " line " + std::to_string(i + 1)
                                      + " is not an example record");
            }
            auto completions = record["completions"].get<std::vector<std::string>>();
            replayed_[record["example_id"].get<std::string>()] = std::move(completions);
            kept.push_back(lines[i]);
        }
        return kept;
    }

    std::filesystem::path path_;
    std::unordered_map<std::string, std::vector<std::string>> replayed_;
    std::mutex mutex_;
    std::ofstream out_;
};

struct ExampleOutcome {
    std::size_t num_samples = 0;
    std::vector<std::size_t> correct_slots;
    std::vector<std::string> completions;
    std::vector<double> produced;
};

json entry_to_json(const KnowledgeEntry& entry)
{
    return json{{"type", "entry"},
                {"example_id", entry.example_id},
                {"question", entry.question},
                {"program", entry.program},
                {"answer", entry.answer},
                {"teacher_id", entry.teacher_id},
                {"sample_index", entry.sample_index},
                {"produced_value", entry.produced_value}};
}

json meta_to_json(const AcquisitionMeta& meta)
{
    return json{{"type", "meta"},
                {"teacher_id", meta.teacher_id},
                {"temperature", meta.temperature},
                {"num_samples", meta.num_samples},
                {"seed", meta.seed},
                {"dataset_fingerprint", meta.dataset_fingerprint}};
}

template <typename T>
T require(const json& record, const char* field, const std::string& where)
{
    const auto it = record.find(field);
    if (it == record.end()) {
        throw SchemaViolation(where + ": missing field '" + field + "'");
    }
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) {
                throw SchemaViolation(where + ": field '" + field + "' must be a number");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) {
                throw SchemaViolation(where + ": field '" + field + "' must be a string");
            }
        } else {
            if (!it->is_number_unsigned()) {
                throw SchemaViolation(where + ": field '" + field + "' must be a non-negative integer");
            }
        }
        return it->get<T>();
    } catch (const json::exception& e) {
        throw SchemaViolation(where + ": field '" + field + "': " + e.what());
    }
}

} // namespace

AcquisitionResult acquire_knowledge(std::span<const SpecExample> dataset, CompletionSampler& sampler,
                                    const PromptBuilder& prompt, const SamplingConfig& config, std::uint64_t seed,
                                    const AcquisitionOptions& options)
{
    if (dataset.empty()) {
        throw std::invalid_argument("acquire_knowledge: empty dataset");
    }
    config.validate();
    const ArithmeticChecker default_checker(options.tolerance);
    const CandidateChecker& checker = options.checker != nullptr ? *options.checker : default_checker;

    AcquisitionMeta meta;
    meta.teacher_id = sampler.model_id();
    meta.temperature = config.greedy ? 0.0 : config.temperature;
    meta.num_samples = config.num_samples;
    meta.seed = seed;
    meta.dataset_fingerprint = dataset_fingerprint(dataset);

    std::unique_ptr<CompletionCheckpoint> checkpoint;
    if (options.checkpoint) {
        const json signature{{"teacher_id", meta.teacher_id},
                             {"temperature", meta.temperature},
                             {"num_samples", config.num_samples},
                             {"max_tokens", config.max_tokens},
                             {"stop", config.stop_sequences},
                             {"greedy", config.greedy},
                             {"seed", seed},
                             {"dataset_fingerprint", meta.dataset_fingerprint},
                             {"prompt_fingerprint", util::hex64(util::fnv1a64(prompt("<probe>")))}};
        checkpoint = std::make_unique<CompletionCheckpoint>(*options.checkpoint, signature);
        if (checkpoint->replayed_count() > 0) {
            spdlog::info("resuming acquisition: {} of {} examples already sampled", checkpoint->replayed_count(),
                         dataset.size());
        }
    }

    std::vector<ExampleOutcome> outcomes(dataset.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto work = [&] {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= dataset.size()) {
                return;
            }
            const SpecExample& example = dataset[i];
            try {
                std::vector<std::string> completions;
                const auto* replayed = checkpoint ? checkpoint->completions(example.id) : nullptr;
                if (replayed != nullptr) {
                    if (replayed->size() != config.num_samples) {
                        throw SchemaViolation("checkpoint record for '" + example.id + "' has "
                                              + std::to_string(replayed->size()) + " completions");
                    }
                    completions = *replayed;
                } else {
                    completions = sampler.sample(example.id, prompt(example.question), config);
                    if (completions.size() != config.num_samples) {
                        throw MalformedResponse("sampler returned " + std::to_string(completions.size())
                                                + " completions, expected " + std::to_string(config.num_samples));
                    }
                    if (checkpoint) {
                        checkpoint->record(example.id, completions);
                    }
                }
                ExampleOutcome& outcome = outcomes[i];
                outcome.num_samples = completions.size();
                for (std::size_t slot = 0; slot < completions.size(); ++slot) {
                    const auto verdict = checker.check(completions[slot], example.answer);
                    if (is_correct(verdict)) {
                        outcome.correct_slots.push_back(slot);
                        outcome.produced.push_back(*verdict.produced_value);
                    }
                }
                outcome.completions = std::move(completions);
            } catch (...) {
                const std::lock_guard lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                failed.store(true);
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, dataset.size());
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    AcquisitionResult result;
    result.knowledge.meta = meta;
    result.report.total = dataset.size();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const SpecExample& example = dataset[i];
        const ExampleOutcome& outcome = outcomes[i];
        result.report.per_example[example.id] = ExampleCoverage{outcome.num_samples, outcome.correct_slots.size()};
        if (outcome.correct_slots.empty()) {
            continue;
        }
        ++result.report.covered;
        auto make_entry = [&](std::size_t k) {
            const std::size_t slot = outcome.correct_slots[k];
            return KnowledgeEntry{example.id,     example.question, outcome.completions[slot], example.answer,
                                  meta.teacher_id, slot,            outcome.produced[k]};
        };
        result.knowledge.entries.push_back(
            make_entry(select_correct_sample(outcome.correct_slots.size(), seed, example.id)));
        if (options.keep_all_correct) {
            for (std::size_t k = 0; k < outcome.correct_slots.size(); ++k) {
                result.all_correct.push_back(make_entry(k));
            }
        }
    }
    result.report.fraction = coverage(result.report);
    return result;
}

AcquisitionResult acquire_knowledge(std::span<const SpecExample> dataset, CompletionSampler& sampler,
                                    const FewShotPrompt& prompt, const SamplingConfig& config, std::uint64_t seed,
                                    const AcquisitionOptions& options)
{
    return acquire_knowledge(dataset, sampler, few_shot_builder(prompt), config, seed, options);
}

void save_entries(const AcquisitionMeta& meta, std::span<const KnowledgeEntry> entries,
                  const std::filesystem::path& path)
{
    std::string content = meta_to_json(meta).dump() + '\n';
    for (const auto& entry : entries) {
        content += entry_to_json(entry).dump();
        content += '\n';
    }
    util::write_text_atomic(path, content);
}

void save_knowledge_set(const KnowledgeSet& knowledge, const std::filesystem::path& path)
{
    save_entries(knowledge.meta, knowledge.entries, path);
}

KnowledgeSet load_knowledge_set(const std::filesystem::path& path, const ToleranceSpec& tolerance)
{
    const std::string content = util::read_text(path);
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    bool have_meta = false;
    KnowledgeSet knowledge;
    std::unordered_map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaViolation(where + ": " + e.what());
        }
        if (!record.is_object()) {
            throw SchemaViolation(where + ": expected a JSON object");
        }
        const std::string type = record.value("type", "");
        if (!have_meta) {
            if (type != "meta") {
                throw SchemaViolation(where + ": first record must be the meta line");
            }
            knowledge.meta.teacher_id = require<std::string>(record, "teacher_id", where);
            knowledge.meta.temperature = require<double>(record, "temperature", where);
            knowledge.meta.num_samples = require<std::size_t>(record, "num_samples", where);
            knowledge.meta.seed = require<std::uint64_t>(record, "seed", where);
            knowledge.meta.dataset_fingerprint = require<std::string>(record, "dataset_fingerprint", where);
            have_meta = true;
            continue;
        }
        if (type != "entry") {
            throw SchemaViolation(where + ": expected an entry record");
        }
        KnowledgeEntry entry;
        entry.example_id = require<std::string>(record, "example_id", where);
        entry.question = require<std::string>(record, "question", where);
        entry.program = require<std::string>(record, "program", where);
        entry.answer = require<double>(record, "answer", where);
        entry.teacher_id = require<std::string>(record, "teacher_id", where);
        entry.sample_index = require<std::size_t>(record, "sample_index", where);
        entry.produced_value = require<double>(record, "produced_value", where);

        if (!seen.emplace(entry.example_id, line_no).second) {
            throw InvariantViolation(where + ": second entry for example '" + entry.example_id + "'");
        }
        if (!std::isfinite(entry.answer)) {
            throw InvariantViolation(where + ": answer is not finite");
        }
        const auto verdict = verify(entry.program, entry.answer, tolerance);
        if (!is_correct(verdict)) {
            throw InvariantViolation(where + ": program for '" + entry.example_id + "' does not verify ("
                                     + std::string(to_string(verdict.status)) + ": " + verdict.detail + ")");
        }
        if (*verdict.produced_value != entry.produced_value) {
            throw InvariantViolation(where + ": recorded produced_value differs from re-execution");
        }
        knowledge.entries.push_back(std::move(entry));
    }
    if (!have_meta) {
        throw SchemaViolation(path.string() + ": missing meta line");
    }
    return knowledge;
}

std::string coverage_report_json(const CoverageReport& report)
{
    json per_example = json::object();
    for (const auto& [id, counts] : report.per_example) {
        per_example[id] = json{{"num_samples", counts.num_samples}, {"num_correct", counts.num_correct}};
    }
    const json doc{{"covered", report.covered},
                   {"total", report.total},
                   {"fraction", report.fraction},
                   {"per_example", per_example}};
    return doc.dump(2) + '\n';
}

CoverageReport parse_coverage_report(std::string_view json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaViolation(std::string("coverage report: ") + e.what());
    }
    CoverageReport report;
    const std::string where = "coverage report";
    report.covered = require<std::size_t>(doc, "covered", where);
    report.total = require<std::size_t>(doc, "total", where);
    report.fraction = require<double>(doc, "fraction", where);
    if (doc.contains("per_example") && doc["per_example"].is_object()) {
        for (const auto& [id, counts] : doc["per_example"].items()) {
            report.per_example[id] = ExampleCoverage{require<std::size_t>(counts, "num_samples", where),
                                                     require<std::size_t>(counts, "num_correct", where)};
        }
    }
    return report;
}

} // namespace ekt
