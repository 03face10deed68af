#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace ekt {

// ---------------------------------------------------------------------------
// Prompts

struct FewShotExample {
    std::string question;
    std::string program;
};

/// Ordered seed examples. Construction checks that there is at least one
/// example and that every program parses; throws std::invalid_argument.
class FewShotPrompt {
public:
    explicit FewShotPrompt(std::vector<FewShotExample> examples);

    const std::vector<FewShotExample>& examples() const noexcept { return examples_; }

private:
    std::vector<FewShotExample> examples_;
};

/// The three-problem prompt (average age, two carpenters, alloy mixture).
FewShotPrompt default_few_shot_prompt();

/// Reads {"examples": [{"question": ..., "program": ...}, ...]}.
/// Throws IoFailure or SchemaViolation.
FewShotPrompt load_few_shot_prompt(const std::filesystem::path& path);

/// `# {question}\n`, one `# ` line per line of a multi-line question.
std::string render_question(std::string_view question);

/// Every example as `# {question}\n{program}\n\n`, then the open question.
/// Throws std::invalid_argument on a blank question.
std::string render_prompt(const FewShotPrompt& prompt, std::string_view question);

/// Builds the completion prompt for a question. Few-shot for teachers and
/// untuned students; zero-shot (question block only) for fine-tuned students.
using PromptBuilder = std::function<std::string(std::string_view question)>;

PromptBuilder few_shot_builder(FewShotPrompt prompt);
PromptBuilder zero_shot_builder();

// ---------------------------------------------------------------------------
// Sampling

struct SamplingConfig {
    double temperature = 0.6;
    std::size_t num_samples = 100;
    std::size_t max_tokens = 256;
    std::vector<std::string> stop_sequences{"\n\n", "\n#"};
    bool greedy = false;

    /// Temperature-0, single-sample decoding.
    static SamplingConfig greedy_decoding();

    /// Throws std::invalid_argument when greedy with num_samples != 1, when
    /// temperature is not positive for sampling, or when a count is zero.
    void validate() const;
};

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stop_sequences);

/// Anything that turns a prompt into completions: a remote teacher, a student
/// served over the same protocol, or a scripted mock. Implementations are
/// safe to call from several threads at once.
class CompletionSampler {
public:
    virtual ~CompletionSampler() = default;

    /// Returns exactly config.num_samples completions, slot-ordered and
    /// truncated at the first stop sequence. `example_id` is informational
    /// for remote samplers and the script key for mocks.
    virtual std::vector<std::string> sample(std::string_view example_id, std::string_view prompt,
                                            const SamplingConfig& config) = 0;

    virtual std::string model_id() const = 0;
};

// ---------------------------------------------------------------------------
// Remote endpoint

struct RetryPolicy {
    std::size_t max_retries = 5;
    std::chrono::milliseconds base_backoff{500};
    double backoff_multiplier = 2.0;
};

struct TeacherEndpoint {
    std::string base_url;
    std::string model_id;
    std::string auth_token_env = "TEACHER_API_KEY";
    bool require_auth = false;
    std::size_t max_in_flight = 4;
    std::size_t max_samples_per_request = 20;
    std::chrono::seconds timeout{120};
    RetryPolicy retry_policy;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Thrown by transports when no HTTP response was obtained at all
/// (connection refused, timeout). Always retried.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Minimal POST-only HTTP seam. Implementations must be thread-safe.
class CompletionTransport {
public:
    using Headers = std::vector<std::pair<std::string, std::string>>;

    virtual ~CompletionTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body, const Headers& headers) = 0;
};

/// Splits "https://host:port/v1" into origin "https://host:port" and path
/// prefix "/v1". Throws std::invalid_argument for unsupported URLs.
std::pair<std::string, std::string> split_base_url(std::string_view base_url);

/// cpp-httplib backed transport for http:// and https:// origins.
std::shared_ptr<CompletionTransport> make_http_transport(const std::string& origin, std::chrono::seconds timeout);

class AuditLog;

/// Client for the text-completion protocol:
///
///     POST {base_url}/completions
///     {"model", "prompt", "temperature", "n", "max_tokens", "stop"}
///  -> {"choices": [{"text": ..., "index": ...}, ...]}
///
/// Large sample counts are split into requests of at most
/// max_samples_per_request, issued concurrently with at most max_in_flight
/// outstanding across all callers of this client.
class HttpCompletionClient final : public CompletionSampler {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpCompletionClient(TeacherEndpoint endpoint,
                                  std::shared_ptr<CompletionTransport> transport = nullptr,
                                  std::filesystem::path audit_log = {});
    ~HttpCompletionClient() override;

    std::vector<std::string> sample(std::string_view example_id, std::string_view prompt,
                                    const SamplingConfig& config) override;

    std::string model_id() const override { return endpoint_.model_id; }

    /// Replaces the backoff sleep, e.g. to keep retry tests fast.
    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

    const TeacherEndpoint& endpoint() const noexcept { return endpoint_; }

private:
    class Limiter;

    std::vector<std::string> request_chunk(std::string_view example_id, std::string_view prompt,
                                           const SamplingConfig& config, std::size_t n);

    TeacherEndpoint endpoint_;
    std::string path_;
    std::shared_ptr<CompletionTransport> transport_;
    std::unique_ptr<Limiter> limiter_;
    std::unique_ptr<AuditLog> audit_;
    Sleeper sleeper_;
};

// ---------------------------------------------------------------------------
// Mock teacher

/// Sample i is texts[i % texts.size()].
struct FixedTexts {
    std::vector<std::string> texts;
};

/// Each sample is `correct_program` with probability `correct_probability`,
/// otherwise `decoy_program`.
struct StochasticProgram {
    std::string correct_program;
    double correct_probability = 0.0;
    std::string decoy_program;
};

using GeneratorSpec = std::variant<FixedTexts, StochasticProgram>;

/// Scripted, seeded stand-in for a teacher. Sample `slot` for `example_id` is
/// a pure function of (seed, example_id, slot), so results do not depend on
/// call order or concurrency. Greedy decoding returns the most likely text.
class MockTeacher final : public CompletionSampler {
public:
    MockTeacher(std::map<std::string, GeneratorSpec, std::less<>> script, std::uint64_t seed,
                std::string model_id = "mock-teacher");

    /// Throws UnknownExampleId for ids missing from the script.
    std::vector<std::string> sample(std::string_view example_id, std::string_view prompt,
                                    const SamplingConfig& config) override;

    std::string model_id() const override { return model_id_; }

    /// Artificial per-call latency, for exercising interruption.
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

private:
    std::map<std::string, GeneratorSpec, std::less<>> script_;
    std::uint64_t seed_;
    std::string model_id_;
    std::chrono::milliseconds latency_{0};
};

} // namespace ekt
