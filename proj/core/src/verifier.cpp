#include "ekt/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ekt/mwp_lang.hpp"
#include "ekt/util.hpp"

namespace ekt {

std::string_view to_string(VerificationStatus status) noexcept
{
    switch (status) {
    case VerificationStatus::Correct:
        return "correct";
    case VerificationStatus::WrongAnswer:
        return "wrong_answer";
    case VerificationStatus::ParseFailure:
        return "parse_failure";
    case VerificationStatus::EvalFailure:
        return "eval_failure";
    }
    return "unknown";
}

std::optional<VerificationStatus> parse_status(std::string_view text) noexcept
{
    for (const auto status : {VerificationStatus::Correct, VerificationStatus::WrongAnswer,
                              VerificationStatus::ParseFailure, VerificationStatus::EvalFailure}) {
        if (to_string(status) == text) {
            return status;
        }
    }
    return std::nullopt;
}

bool ToleranceSpec::accepts(double value, double expected) const noexcept
{
    return std::fabs(value - expected) <= atol + rtol * std::max(1.0, std::fabs(expected));
}

VerificationOutcome verify(std::string_view candidate_source, double expected, const ToleranceSpec& tolerance)
{
    if (!std::isfinite(expected)) {
        throw std::invalid_argument("verify: expected answer must be finite");
    }
    VerificationOutcome outcome;
    lang::Program program;
    try {
        program = lang::parse_program(candidate_source);
    } catch (const lang::ParseError& e) {
        outcome.status = VerificationStatus::ParseFailure;
        outcome.detail = e.what();
        return outcome;
    }
    double value = 0.0;
    try {
        value = lang::evaluate(program);
    } catch (const lang::EvalError& e) {
        outcome.status = VerificationStatus::EvalFailure;
        outcome.detail = std::string(lang::to_string(e.kind())) + ": " + e.what();
        return outcome;
    }
    outcome.produced_value = value;
    if (tolerance.accepts(value, expected)) {
        outcome.status = VerificationStatus::Correct;
    } else {
        outcome.status = VerificationStatus::WrongAnswer;
        outcome.detail = "produced " + util::format_real(value) + ", expected " + util::format_real(expected);
    }
    return outcome;
}

bool is_correct(const VerificationOutcome& outcome) noexcept
{
    return outcome.status == VerificationStatus::Correct;
}

VerificationOutcome ArithmeticChecker::check(std::string_view candidate_source, double expected) const
{
    return verify(candidate_source, expected, tolerance_);
}

} // namespace ekt
