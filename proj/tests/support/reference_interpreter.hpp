#pragma once

#include <string>
#include <string_view>

namespace ekt::testkit {

enum class RefStatus { Value, SyntaxError, UndefinedVariable, DivisionByZero, NonFinite, MissingAnswer };

std::string_view to_string(RefStatus status);

struct RefResult {
    RefStatus status = RefStatus::SyntaxError;
    double value = 0.0;
};

// Independent evaluator for the straight-line arithmetic subset. Converts
// each line to postfix with the shunting-yard algorithm and runs it on a
// value stack; shares no code with the library interpreter.
RefResult reference_evaluate(std::string_view source);

} // namespace ekt::testkit
