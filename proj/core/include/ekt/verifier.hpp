#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ekt {

enum class VerificationStatus { Correct, WrongAnswer, ParseFailure, EvalFailure };

/// Lowercase wire names: "correct", "wrong_answer", "parse_failure",
/// "eval_failure".
std::string_view to_string(VerificationStatus status) noexcept;
std::optional<VerificationStatus> parse_status(std::string_view text) noexcept;

struct ToleranceSpec {
    double atol = 1e-6;
    double rtol = 1e-6;

    /// |value - expected| <= atol + rtol * max(1, |expected|)
    bool accepts(double value, double expected) const noexcept;
};

struct VerificationOutcome {
    VerificationStatus status = VerificationStatus::ParseFailure;
    std::optional<double> produced_value; // set for Correct and WrongAnswer
    std::string detail;
};

/// Runs `candidate_source` and compares its `answer` with `expected`.
/// Never throws for anything the candidate does; `expected` must be finite.
VerificationOutcome verify(std::string_view candidate_source, double expected,
                           const ToleranceSpec& tolerance = {});

bool is_correct(const VerificationOutcome& outcome) noexcept;

/// Executor seam: acquisition and evaluation only see this interface, so a
/// different execution backend can stand in for the arithmetic subset.
class CandidateChecker {
public:
    virtual ~CandidateChecker() = default;
    virtual VerificationOutcome check(std::string_view candidate_source, double expected) const = 0;
};

/// Default checker backed by the straight-line arithmetic interpreter.
class ArithmeticChecker final : public CandidateChecker {
public:
    explicit ArithmeticChecker(ToleranceSpec tolerance = {})
        : tolerance_(tolerance)
    {
    }

    VerificationOutcome check(std::string_view candidate_source, double expected) const override;

    const ToleranceSpec& tolerance() const noexcept { return tolerance_; }

private:
    ToleranceSpec tolerance_;
};

} // namespace ekt
