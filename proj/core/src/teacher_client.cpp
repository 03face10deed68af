#include "ekt/teacher_client.hpp"

#include <condition_variable>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ekt/errors.hpp"
#include "ekt/mwp_lang.hpp"
#include "ekt/rng.hpp"
#include "ekt/util.hpp"

namespace ekt {

using nlohmann::json;

namespace {

std::string strip_trailing_newlines(std::string text)
{
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
        text.pop_back();
    }
    return text;
}

} // namespace

FewShotPrompt::FewShotPrompt(std::vector<FewShotExample> examples)
    : examples_(std::move(examples))
{
    if (examples_.empty()) {
        throw std::invalid_argument("few-shot prompt needs at least one example");
    }
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        auto& example = examples_[i];
        if (util::trim(example.question).empty()) {
            throw std::invalid_argument("few-shot example " + std::to_string(i) + " has a blank question");
        }
        example.program = strip_trailing_newlines(std::move(example.program));
        try {
            lang::parse_program(example.program);
        } catch (const lang::ParseError& e) {
            throw std::invalid_argument("few-shot example " + std::to_string(i) + " program: " + e.what());
        }
    }
}

FewShotPrompt default_few_shot_prompt()
{
    return FewShotPrompt({
        {"The total average age of three friends is 40. Jared is ten years older than Hakimi, and "
         "Molly's age is 30. How old is Hakimi?",
         "n0 = 40\n"
         "n1 = 10\n"
         "n2 = 30\n"
         "t0 = 3 * n0\n"
         "t1 = t0 - n2\n"
         "answer = (t1 - n1) / 2"},
        {"A carpenter worked alone for 1 day on a job that would take him 7 more days to finish. He and "
         "another carpenter completed the job in 4 more days. How many days would it have taken the second "
         "carpenter to do the complete job working alone?",
         "n0 = 1.0\n"
         "n1 = 7.0\n"
         "n2 = 4.0\n"
         "t0 = n0 + n1\n"
         "t1 = n2 * t0\n"
         "answer = t1 / 2.0"},
        {"In two alloys, copper and tin are related in the ratios of 4 : 1 and 1 : 3. 10 kg of 1st alloy, "
         "16 kg of the 2nd alloy and some pure copper are melted together. An alloy is obtained in which the "
         "ratio of copper and tin was 3 : 2 . Find the weight of the new alloy.",
         "n0 = 4.0\n"
         "n1 = 1.0\n"
         "n2 = 1.0\n"
         "n3 = 3.0\n"
         "n4 = 10.0\n"
         "n5 = 16.0\n"
         "n6 = 2.0\n"
         "n7 = 3.0\n"
         "n8 = 2.0\n"
         "t0 = n4 + n5\n"
         "t1 = n0 + n1\n"
         "t2 = n3 / n0\n"
         "t3 = n4 / t1\n"
         "t4 = n5 * t2\n"
         "t5 = t3 + t4\n"
         "t6 = n3 * t5\n"
         "t7 = t6 / n6\n"
         "t8 = t7 - t4\n"
         "answer = t0 + t8"},
    });
}

FewShotPrompt load_few_shot_prompt(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoFailure("cannot open prompt file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaViolation(path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("examples") || !doc["examples"].is_array()) {
        throw SchemaViolation(path.string() + ": expected an object with an 'examples' array");
    }
    std::vector<FewShotExample> examples;
    for (const auto& item : doc["examples"]) {
        if (!item.is_object() || !item.contains("question") || !item.contains("program")
            || !item["question"].is_string() || !item["program"].is_string()) {
            throw SchemaViolation(path.string() + ": each example needs string 'question' and 'program'");
        }
        examples.push_back({item["question"].get<std::string>(), item["program"].get<std::string>()});
    }
    try {
        return FewShotPrompt(std::move(examples));
    } catch (const std::invalid_argument& e) {
        throw SchemaViolation(path.string() + ": " + e.what());
    }
}

std::string render_question(std::string_view question)
{
    const std::string text = strip_trailing_newlines(std::string(question));
    std::string out;
    for (const auto line : util::split_lines(text)) {
        out += "# ";
        out += line;
        out += '\n';
    }
    return out;
}

std::string render_prompt(const FewShotPrompt& prompt, std::string_view question)
{
    if (util::trim(question).empty()) {
        throw std::invalid_argument("render_prompt: blank question");
    }
    std::string out;
    for (const auto& example : prompt.examples()) {
        out += render_question(example.question);
        out += example.program;
        out += "\n\n";
    }
    out += render_question(question);
    return out;
}

PromptBuilder few_shot_builder(FewShotPrompt prompt)
{
    return [prompt = std::move(prompt)](std::string_view question) { return render_prompt(prompt, question); };
}

PromptBuilder zero_shot_builder()
{
    return [](std::string_view question) {
        if (util::trim(question).empty()) {
            throw std::invalid_argument("zero-shot prompt: blank question");
        }
        return render_question(question);
    };
}

SamplingConfig SamplingConfig::greedy_decoding()
{
    SamplingConfig config;
    config.greedy = true;
    config.temperature = 0.0;
    config.num_samples = 1;
    return config;
}

void SamplingConfig::validate() const
{
    if (num_samples == 0) {
        throw std::invalid_argument("num_samples must be at least 1");
    }
    if (max_tokens == 0) {
        throw std::invalid_argument("max_tokens must be at least 1");
    }
    if (greedy && num_samples != 1) {
        throw std::invalid_argument("greedy decoding produces exactly one sample");
    }
    if (!greedy && !(temperature > 0.0)) {
        throw std::invalid_argument("temperature must be positive unless decoding greedily");
    }
    if (temperature < 0.0) {
        throw std::invalid_argument("temperature must be non-negative");
    }
}

std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stop_sequences)
{
    std::size_t cut = text.size();
    for (const auto& stop : stop_sequences) {
        if (stop.empty()) {
            continue;
        }
        cut = std::min(cut, text.find(stop));
    }
    return std::string(text.substr(0, cut));
}

// ---------------------------------------------------------------------------

class AuditLog {
public:
    explicit AuditLog(const std::filesystem::path& path)
        : out_(path, std::ios::app | std::ios::binary)
    {
        if (!out_) {
            throw IoFailure("cannot open audit log " + path.string());
        }
    }

    void write(const json& record)
    {
        const std::lock_guard lock(mutex_);
        out_ << record.dump() << '\n';
        out_.flush();
    }

private:
    std::mutex mutex_;
    std::ofstream out_;
};

class HttpCompletionClient::Limiter {
public:
    explicit Limiter(std::size_t capacity)
        : available_(capacity)
    {
    }

    void acquire()
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return available_ > 0; });
        --available_;
    }

    void release()
    {
        {
            const std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t available_;
};

std::pair<std::string, std::string> split_base_url(std::string_view base_url)
{
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw std::invalid_argument("base_url needs a scheme: " + std::string(base_url));
    }
    const auto scheme = base_url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw std::invalid_argument("unsupported scheme in base_url: " + std::string(base_url));
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    std::string origin(base_url.substr(0, path_start));
    std::string prefix = path_start == std::string_view::npos ? std::string() : std::string(base_url.substr(path_start));
    while (!prefix.empty() && prefix.back() == '/') {
        prefix.pop_back();
    }
    if (origin.size() <= scheme_end + 3) {
        throw std::invalid_argument("base_url has no host: " + std::string(base_url));
    }
    return {origin, prefix};
}

HttpCompletionClient::HttpCompletionClient(TeacherEndpoint endpoint, std::shared_ptr<CompletionTransport> transport,
                                           std::filesystem::path audit_log)
    : endpoint_(std::move(endpoint))
    , transport_(std::move(transport))
    , sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
{
    if (endpoint_.max_in_flight == 0) {
        throw std::invalid_argument("max_in_flight must be at least 1");
    }
    if (endpoint_.max_samples_per_request == 0) {
        throw std::invalid_argument("max_samples_per_request must be at least 1");
    }
    auto [origin, prefix] = split_base_url(endpoint_.base_url);
    path_ = prefix + "/completions";
    if (!transport_) {
        transport_ = make_http_transport(origin, endpoint_.timeout);
    }
    limiter_ = std::make_unique<Limiter>(endpoint_.max_in_flight);
    if (!audit_log.empty()) {
        audit_ = std::make_unique<AuditLog>(audit_log);
    }
}

HttpCompletionClient::~HttpCompletionClient() = default;

std::vector<std::string> HttpCompletionClient::sample(std::string_view example_id, std::string_view prompt,
                                                      const SamplingConfig& config)
{
    config.validate();
    const std::size_t total = config.num_samples;
    const std::size_t per_request = endpoint_.max_samples_per_request;
    const std::size_t chunks = (total + per_request - 1) / per_request;

    std::vector<std::vector<std::string>> results(chunks);
    std::vector<std::exception_ptr> errors(chunks);
    {
        std::vector<std::jthread> workers;
        workers.reserve(chunks);
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t n = std::min(per_request, total - c * per_request);
            workers.emplace_back([&, c, n] {
                try {
                    results[c] = request_chunk(example_id, prompt, config, n);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
    }
    for (const auto& error : errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }
    std::vector<std::string> completions;
    completions.reserve(total);
    for (auto& chunk : results) {
        for (auto& text : chunk) {
            completions.push_back(std::move(text));
        }
    }
    return completions;
}

std::vector<std::string> HttpCompletionClient::request_chunk(std::string_view example_id, std::string_view prompt,
                                                             const SamplingConfig& config, std::size_t n)
{
    json body;
    body["model"] = endpoint_.model_id;
    body["prompt"] = prompt;
    body["temperature"] = config.greedy ? 0.0 : config.temperature;
    body["n"] = n;
    body["max_tokens"] = config.max_tokens;
    body["stop"] = config.stop_sequences;
    const std::string payload = body.dump();

    CompletionTransport::Headers headers{{"Content-Type", "application/json"}};
    if (!endpoint_.auth_token_env.empty()) {
        const char* token = std::getenv(endpoint_.auth_token_env.c_str());
        if (token != nullptr && *token != '\0') {
            headers.emplace_back("Authorization", std::string("Bearer ") + token);
        } else if (endpoint_.require_auth) {
            throw AuthFailure("environment variable " + endpoint_.auth_token_env + " is not set");
        }
    } else if (endpoint_.require_auth) {
        throw AuthFailure("endpoint requires auth but no token variable is configured");
    }

    const auto& policy = endpoint_.retry_policy;
    std::string last_failure;
    for (std::size_t attempt = 0;; ++attempt) {
        HttpResponse response;
        bool transient = false;
        limiter_->acquire();
        try {
            response = transport_->post(path_, payload, headers);
        } catch (const TransportError& e) {
            transient = true;
            last_failure = e.what();
        } catch (...) {
            limiter_->release();
            throw;
        }
        limiter_->release();

        if (audit_) {
            json record{{"type", "exchange"}, {"example_id", example_id}, {"attempt", attempt}, {"request", body}};
            if (transient) {
                record["transport_error"] = last_failure;
            } else {
                record["status"] = response.status;
                record["response"] = response.body;
            }
            audit_->write(record);
        }

        if (!transient) {
            if (response.status == 401 || response.status == 403) {
                throw AuthFailure("HTTP " + std::to_string(response.status) + " from " + endpoint_.base_url);
            }
            if (response.status == 429 || response.status >= 500) {
                transient = true;
                last_failure = "HTTP " + std::to_string(response.status);
            } else if (response.status < 200 || response.status >= 300) {
                throw EndpointError("HTTP " + std::to_string(response.status) + ": " + response.body.substr(0, 200));
            }
        }
        if (transient) {
            if (attempt >= policy.max_retries) {
                throw EndpointUnreachable(endpoint_.base_url + ": " + last_failure + " after "
                                          + std::to_string(attempt + 1) + " attempts");
            }
            double factor = 1.0;
            for (std::size_t i = 0; i < attempt; ++i) {
                factor *= policy.backoff_multiplier;
            }
            const auto delay = std::chrono::milliseconds(
                static_cast<std::int64_t>(static_cast<double>(policy.base_backoff.count()) * factor));
            spdlog::debug("retrying {} in {} ms ({})", endpoint_.base_url, delay.count(), last_failure);
            sleeper_(delay);
            continue;
        }

        json parsed;
        try {
            parsed = json::parse(response.body);
        } catch (const json::parse_error& e) {
            throw MalformedResponse(std::string("response is not JSON: ") + e.what());
        }
        if (!parsed.is_object() || !parsed.contains("choices") || !parsed["choices"].is_array()) {
            throw MalformedResponse("response has no 'choices' array");
        }
        const auto& choices = parsed["choices"];
        if (choices.size() != n) {
            throw MalformedResponse("expected " + std::to_string(n) + " choices, got " + std::to_string(choices.size()));
        }
        std::vector<std::string> texts(n);
        std::vector<bool> filled(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& choice = choices[i];
            if (!choice.is_object() || !choice.contains("text") || !choice["text"].is_string()) {
                throw MalformedResponse("choice " + std::to_string(i) + " has no string 'text'");
            }
            std::size_t slot = i;
            if (choice.contains("index")) {
                if (!choice["index"].is_number_unsigned() || choice["index"].get<std::size_t>() >= n) {
                    throw MalformedResponse("choice " + std::to_string(i) + " has an invalid 'index'");
                }
                slot = choice["index"].get<std::size_t>();
            }
            if (filled[slot]) {
                throw MalformedResponse("duplicate choice index " + std::to_string(slot));
            }
            filled[slot] = true;
            texts[slot] = truncate_at_stop(choice["text"].get_ref<const std::string&>(), config.stop_sequences);
        }
        return texts;
    }
}

// ---------------------------------------------------------------------------

MockTeacher::MockTeacher(std::map<std::string, GeneratorSpec, std::less<>> script, std::uint64_t seed,
                         std::string model_id)
    : script_(std::move(script))
    , seed_(seed)
    , model_id_(std::move(model_id))
{
    for (const auto& [id, spec] : script_) {
        if (const auto* fixed = std::get_if<FixedTexts>(&spec); fixed != nullptr && fixed->texts.empty()) {
            throw std::invalid_argument("mock script for '" + id + "' has no texts");
        }
        if (const auto* stochastic = std::get_if<StochasticProgram>(&spec)) {
            if (!(stochastic->correct_probability >= 0.0 && stochastic->correct_probability <= 1.0)) {
                throw std::invalid_argument("mock script for '" + id + "' has probability outside [0, 1]");
            }
        }
    }
}

std::vector<std::string> MockTeacher::sample(std::string_view example_id, std::string_view /*prompt*/,
                                             const SamplingConfig& config)
{
    config.validate();
    const auto it = script_.find(example_id);
    if (it == script_.end()) {
        throw UnknownExampleId("mock teacher has no script for '" + std::string(example_id) + "'");
    }
    if (latency_.count() > 0) {
        std::this_thread::sleep_for(latency_);
    }
    const std::uint64_t stream = util::fnv1a64(example_id, rng::derive_seed(seed_, rng::kMockTeacherStream));
    std::vector<std::string> out;
    out.reserve(config.num_samples);
    for (std::size_t slot = 0; slot < config.num_samples; ++slot) {
        std::string text;
        if (const auto* fixed = std::get_if<FixedTexts>(&it->second)) {
            text = fixed->texts[slot % fixed->texts.size()];
        } else {
            const auto& spec = std::get<StochasticProgram>(it->second);
            bool correct = false;
            if (config.greedy) {
                correct = spec.correct_probability >= 0.5;
            } else {
                auto engine = rng::make_engine(rng::derive_seed(stream, rng::kMockTeacherStream, slot));
                correct = rng::uniform01(engine) < spec.correct_probability;
            }
            text = correct ? spec.correct_program : spec.decoy_program;
        }
        out.push_back(truncate_at_stop(text, config.stop_sequences));
    }
    return out;
}

} // namespace ekt
