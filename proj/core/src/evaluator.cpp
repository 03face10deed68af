#include "ekt/evaluator.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ekt/errors.hpp"
#include "ekt/util.hpp"

namespace ekt {

using nlohmann::json;

std::string_view to_string(PassAtKEstimator estimator) noexcept
{
    return estimator == PassAtKEstimator::Empirical ? "empirical" : "unbiased";
}

PassAtKEstimator parse_estimator(std::string_view text)
{
    if (text == "empirical") {
        return PassAtKEstimator::Empirical;
    }
    if (text == "unbiased") {
        return PassAtKEstimator::Unbiased;
    }
    throw std::invalid_argument("unknown estimator '" + std::string(text) + "'");
}

std::vector<ExampleEvalResult> evaluate_samples(const SampleMap& samples, std::span<const SpecExample> dataset,
                                                const CandidateChecker& checker)
{
    std::unordered_map<std::string_view, const SpecExample*> by_id;
    for (const auto& example : dataset) {
        by_id.emplace(example.id, &example);
    }
    for (const auto& [id, programs] : samples) {
        if (!by_id.contains(id)) {
            throw UnknownExampleId("samples reference unknown example '" + id + "'");
        }
        if (programs.empty()) {
            throw EmptySampleList("no samples for example '" + id + "'");
        }
    }
    std::vector<ExampleEvalResult> results;
    results.reserve(samples.size());
    for (const auto& example : dataset) {
        const auto it = samples.find(example.id);
        if (it == samples.end()) {
            continue;
        }
        ExampleEvalResult result;
        result.example_id = example.id;
        result.n_samples = it->second.size();
        for (const auto& program : it->second) {
            const auto outcome = checker.check(program, example.answer);
            result.outcomes.push_back(outcome.status);
            if (is_correct(outcome)) {
                ++result.n_correct;
            }
        }
        results.push_back(std::move(result));
    }
    return results;
}

double pass_at_k_empirical(std::span<const ExampleEvalResult> results, std::size_t k)
{
    if (k == 0) {
        throw std::invalid_argument("pass@k needs k >= 1");
    }
    if (results.empty()) {
        throw std::invalid_argument("pass@k over no examples");
    }
    std::size_t passed = 0;
    for (const auto& result : results) {
        if (result.outcomes.size() < k) {
            throw InsufficientSamples("example '" + result.example_id + "' has " + std::to_string(result.outcomes.size())
                                      + " samples, pass@" + std::to_string(k) + " needs " + std::to_string(k));
        }
        const auto window = std::span(result.outcomes).first(k);
        if (std::find(window.begin(), window.end(), VerificationStatus::Correct) != window.end()) {
            ++passed;
        }
    }
    return static_cast<double>(passed) / static_cast<double>(results.size());
}

double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k)
{
    if (c > n || k < 1 || k > n) {
        throw DomainError("pass@k undefined for n=" + std::to_string(n) + ", c=" + std::to_string(c)
                          + ", k=" + std::to_string(k));
    }
    if (n - c < k) {
        return 1.0;
    }
    // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
    double miss = 1.0;
    for (std::size_t i = n - c + 1; i <= n; ++i) {
        miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    }
    return 1.0 - miss;
}

double pass_at_k_unbiased(std::span<const ExampleEvalResult> results, std::size_t k)
{
    if (results.empty()) {
        throw std::invalid_argument("pass@k over no examples");
    }
    double total = 0.0;
    for (const auto& result : results) {
        if (result.n_samples < k) {
            throw InsufficientSamples("example '" + result.example_id + "' has " + std::to_string(result.n_samples)
                                      + " samples, pass@" + std::to_string(k) + " needs " + std::to_string(k));
        }
        total += pass_at_k_unbiased(result.n_samples, result.n_correct, k);
    }
    return total / static_cast<double>(results.size());
}

EvalReport build_report(std::vector<ExampleEvalResult> results, std::span<const std::size_t> k_values,
                        PassAtKEstimator estimator, DecodeMode decode_mode)
{
    EvalReport report;
    report.k_values.assign(k_values.begin(), k_values.end());
    report.estimator = estimator;
    report.decode_mode = decode_mode;
    for (const std::size_t k : k_values) {
        report.pass_at_k[k] = estimator == PassAtKEstimator::Empirical ? pass_at_k_empirical(results, k)
                                                                       : pass_at_k_unbiased(results, k);
    }
    report.per_example = std::move(results);
    return report;
}

std::string eval_report_json(const EvalReport& report)
{
    json pass_at_k = json::object();
    for (const auto& [k, value] : report.pass_at_k) {
        pass_at_k[std::to_string(k)] = value;
    }
    json per_example = json::array();
    for (const auto& result : report.per_example) {
        json outcomes = json::array();
        for (const auto status : result.outcomes) {
            outcomes.push_back(std::string(to_string(status)));
        }
        per_example.push_back(json{{"example_id", result.example_id},
                                   {"n_samples", result.n_samples},
                                   {"n_correct", result.n_correct},
                                   {"outcomes", outcomes}});
    }
    json decode = report.decode_mode.greedy
        ? json{{"mode", "greedy"}}
        : json{{"mode", "temperature"}, {"temperature", report.decode_mode.temperature}};
    const json doc{{"k_values", report.k_values},
                   {"pass_at_k", pass_at_k},
                   {"estimator", std::string(to_string(report.estimator))},
                   {"per_example", per_example},
                   {"decode_mode", decode}};
    return doc.dump(2) + '\n';
}

SampleFile load_sample_file(const std::filesystem::path& path)
{
    const std::string content = util::read_text(path);
    std::istringstream in(content);
    SampleFile file;
    bool have_meta = false;
    std::map<std::string, std::map<std::size_t, std::string>> indexed;
    std::string line;
    std::size_t line_no = 0;
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
        try {
            if (type == "meta") {
                if (have_meta) {
                    throw SchemaViolation(where + ": second meta line");
                }
                file.meta.model_id = record.value("model_id", "");
                const std::string mode = record.value("decode_mode", "temperature");
                if (mode != "greedy" && mode != "temperature") {
                    throw SchemaViolation(where + ": decode_mode must be 'greedy' or 'temperature'");
                }
                file.meta.decode_mode.greedy = mode == "greedy";
                file.meta.decode_mode.temperature = record.value("temperature", 0.0);
                file.meta.num_samples = record.value("num_samples", std::size_t{0});
                file.meta.seed = record.value("seed", std::uint64_t{0});
                have_meta = true;
            } else if (type == "sample") {
                if (!have_meta) {
                    throw SchemaViolation(where + ": sample before meta line");
                }
                const auto id = record.at("example_id").get<std::string>();
                const auto index = record.at("sample_index").get<std::size_t>();
                auto program = record.at("program").get<std::string>();
                if (!indexed[id].emplace(index, std::move(program)).second) {
                    throw SchemaViolation(where + ": duplicate sample_index " + std::to_string(index) + " for '" + id
                                          + "'");
                }
            } else {
                throw SchemaViolation(where + ": unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw SchemaViolation(where + ": " + e.what());
        }
    }
    if (!have_meta) {
        throw SchemaViolation(path.string() + ": missing meta line");
    }
    for (auto& [id, slots] : indexed) {
        auto& programs = file.samples[id];
        std::size_t expected = 0;
        for (auto& [index, program] : slots) {
            if (index != expected++) {
                throw SchemaViolation(path.string() + ": sample indices for '" + id + "' are not contiguous from 0");
            }
            programs.push_back(std::move(program));
        }
    }
    return file;
}

void save_sample_file(const SampleFile& file, const std::filesystem::path& path)
{
    std::string content = json{{"type", "meta"},
                               {"model_id", file.meta.model_id},
                               {"decode_mode", file.meta.decode_mode.greedy ? "greedy" : "temperature"},
                               {"temperature", file.meta.decode_mode.temperature},
                               {"num_samples", file.meta.num_samples},
                               {"seed", file.meta.seed}}
                              .dump()
        + '\n';
    for (const auto& [id, programs] : file.samples) {
        for (std::size_t i = 0; i < programs.size(); ++i) {
            content += json{{"type", "sample"}, {"example_id", id}, {"sample_index", i}, {"program", programs[i]}}.dump();
            content += '\n';
        }
    }
    util::write_text_atomic(path, content);
}

} // namespace ekt
