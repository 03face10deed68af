#include "ekt/dataset.hpp"

#include <fstream>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ekt/errors.hpp"
#include "ekt/rng.hpp"
#include "ekt/util.hpp"

namespace ekt {

using nlohmann::json;

std::string positional_id(std::size_t position)
{
    return "example-" + std::to_string(position);
}

double extract_answer(std::string_view answer_text)
{
    static constexpr std::string_view kMarker = "#### ";
    std::string_view candidate;
    if (const auto at = answer_text.rfind(kMarker); at != std::string_view::npos) {
        candidate = answer_text.substr(at + kMarker.size());
        candidate = candidate.substr(0, std::min(candidate.find('\n'), candidate.size()));
    } else {
        candidate = answer_text;
    }
    std::string cleaned;
    for (const char c : util::trim(candidate)) {
        if (c != ',') {
            cleaned += c;
        }
    }
    const auto value = util::parse_real(cleaned);
    if (!value) {
        throw UnparsableAnswer("no numeric answer in '" + std::string(util::trim(answer_text).substr(0, 80)) + "'");
    }
    if (!std::isfinite(*value)) {
        throw UnparsableAnswer("answer '" + cleaned + "' is not finite");
    }
    return *value;
}

SpecExample parse_record(std::string_view raw, std::size_t position)
{
    json record;
    try {
        record = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw MalformedRecord(std::string("record is not valid JSON: ") + e.what());
    }
    if (!record.is_object()) {
        throw MalformedRecord("record is not a JSON object");
    }
    SpecExample example;
    if (const auto it = record.find("id"); it != record.end() && !it->is_null()) {
        if (!it->is_string() || util::trim(it->get_ref<const std::string&>()).empty()) {
            throw MalformedRecord("field 'id' must be a non-empty string");
        }
        example.id = it->get<std::string>();
    } else {
        example.id = positional_id(position);
    }
    const auto question = record.find("question");
    if (question == record.end() || !question->is_string()) {
        throw MalformedRecord("missing string field 'question'");
    }
    example.question = question->get<std::string>();
    if (util::trim(example.question).empty()) {
        throw MalformedRecord("field 'question' is blank");
    }
    const auto answer = record.find("answer");
    if (answer == record.end()) {
        throw MalformedRecord("missing field 'answer'");
    }
    if (answer->is_number()) {
        example.answer = answer->get<double>();
        if (!std::isfinite(example.answer)) {
            throw UnparsableAnswer("answer is not finite");
        }
    } else if (answer->is_string()) {
        example.answer = extract_answer(answer->get_ref<const std::string&>());
    } else {
        throw MalformedRecord("field 'answer' must be a string or number");
    }
    return example;
}

std::string serialize_example(const SpecExample& example)
{
    json record;
    record["id"] = example.id;
    record["question"] = example.question;
    record["answer"] = example.answer;
    return record.dump();
}

std::vector<SpecExample> load_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoFailure("cannot open dataset " + path.string());
    }
    std::vector<SpecExample> examples;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    std::size_t position = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) {
            continue;
        }
        const std::size_t this_position = position++;
        try {
            SpecExample example = parse_record(line, this_position);
            if (!seen.insert(example.id).second) {
                spdlog::warn("{}:{}: duplicate id '{}', record skipped", path.string(), line_no, example.id);
                continue;
            }
            examples.push_back(std::move(example));
        } catch (const InputError& e) {
            spdlog::warn("{}:{}: {}, record skipped", path.string(), line_no, e.what());
        }
    }
    return examples;
}

void save_dataset(const std::filesystem::path& path, std::span<const SpecExample> examples)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoFailure("cannot write dataset " + path.string());
    }
    for (const auto& example : examples) {
        out << serialize_example(example) << '\n';
    }
    if (!out) {
        throw IoFailure("write failed for " + path.string());
    }
}

std::string dataset_fingerprint(std::span<const SpecExample> examples)
{
    std::uint64_t hash = util::fnv1a64("");
    for (const auto& example : examples) {
        hash = util::fnv1a64(serialize_example(example), hash);
        hash = util::fnv1a64("\n", hash);
    }
    return util::hex64(hash);
}

DatasetSplit split_dataset(std::span<const SpecExample> examples, std::size_t validation_size, std::uint64_t seed)
{
    if (validation_size > examples.size()) {
        throw InsufficientExamples("validation size " + std::to_string(validation_size) + " exceeds "
                                   + std::to_string(examples.size()) + " examples");
    }
    // Partial Fisher-Yates: the first validation_size slots of `order` end up
    // a uniformly random subset.
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto engine = rng::make_engine(rng::derive_seed(seed, rng::kSplitStream));
    for (std::size_t i = 0; i < validation_size; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng::uniform_index(engine, order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::vector<bool> held_out(examples.size(), false);
    for (std::size_t i = 0; i < validation_size; ++i) {
        held_out[order[i]] = true;
    }
    DatasetSplit split;
    split.seed = seed;
    split.validation.reserve(validation_size);
    split.train.reserve(examples.size() - validation_size);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        (held_out[i] ? split.validation : split.train).push_back(examples[i]);
    }
    return split;
}

} // namespace ekt
