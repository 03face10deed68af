#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "ekt/mwp_lang.hpp"
#include "program_gen.hpp"
#include "reference_interpreter.hpp"

namespace {

using namespace ekt::lang;
using ekt::testkit::RefStatus;

double run(std::string_view source)
{
    return evaluate(parse_program(source));
}

EvalErrorKind eval_error_kind(std::string_view source)
{
    try {
        run(source);
    } catch (const EvalError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an EvalError for:\n" << source;
    return EvalErrorKind::MissingAnswer;
}

ParseError parse_error(std::string_view source)
{
    try {
        parse_program(source);
    } catch (const ParseError& e) {
        return e;
    }
    ADD_FAILURE() << "expected a ParseError for:\n" << source;
    return ParseError(0, 0, "none");
}

TEST(MwpLang, EvaluatesStatementsInOrder)
{
    EXPECT_DOUBLE_EQ(run("n0 = 40\nt0 = 3 * n0\nanswer = (t0 - n0) / 2\n"), 40.0);
}

TEST(MwpLang, PrecedenceAndAssociativity)
{
    EXPECT_DOUBLE_EQ(run("answer = 2 + 3 * 4"), 14.0);
    EXPECT_DOUBLE_EQ(run("answer = (2 + 3) * 4"), 20.0);
    EXPECT_DOUBLE_EQ(run("answer = 10 - 4 - 3"), 3.0);
    EXPECT_DOUBLE_EQ(run("answer = 64 / 4 / 2"), 8.0);
    EXPECT_DOUBLE_EQ(run("answer = -2 * 3"), -6.0);
    EXPECT_DOUBLE_EQ(run("answer = 2 * -3"), -6.0);
    EXPECT_DOUBLE_EQ(run("answer = --5"), 5.0);
    EXPECT_DOUBLE_EQ(run("answer = 1 - -1"), 2.0);
}

TEST(MwpLang, DivisionIsTrueDivision)
{
    EXPECT_DOUBLE_EQ(run("answer = 7 / 2"), 3.5);
}

TEST(MwpLang, LiteralForms)
{
    EXPECT_DOUBLE_EQ(run("answer = .5 + 1. + 2.25"), 3.75);
    EXPECT_DOUBLE_EQ(run("answer = 1e3 + 2E-1"), 1000.2);
}

TEST(MwpLang, CommentsBlankLinesAndReassignment)
{
    const char* source = "# header\n\nx = 1  # trailing\nx = x + 1\n\n# done\nanswer = x\n";
    EXPECT_DOUBLE_EQ(run(source), 2.0);
}

TEST(MwpLang, LastAnswerAssignmentWins)
{
    EXPECT_DOUBLE_EQ(run("answer = 1\nanswer = answer * 10\n"), 10.0);
}

TEST(MwpLang, UndefinedVariable)
{
    EXPECT_EQ(eval_error_kind("answer = x + 1"), EvalErrorKind::UndefinedVariable);
    EXPECT_EQ(eval_error_kind("answer = y\ny = 2\n"), EvalErrorKind::UndefinedVariable);
}

TEST(MwpLang, DivisionByZeroIsTyped)
{
    EXPECT_EQ(eval_error_kind("answer = 1 / 0"), EvalErrorKind::DivisionByZero);
    EXPECT_EQ(eval_error_kind("z = 3 - 3\nanswer = 1 / z"), EvalErrorKind::DivisionByZero);
    EXPECT_EQ(eval_error_kind("answer = 1 / -0.0"), EvalErrorKind::DivisionByZero);
}

TEST(MwpLang, NonFiniteIsTyped)
{
    EXPECT_EQ(eval_error_kind("answer = 1e300 * 1e300"), EvalErrorKind::NonFiniteResult);
    EXPECT_EQ(eval_error_kind("answer = 1e999"), EvalErrorKind::NonFiniteResult);
    EXPECT_EQ(eval_error_kind("big = 1e308 * 10\nanswer = 1"), EvalErrorKind::NonFiniteResult);
}

TEST(MwpLang, MissingAnswer)
{
    EXPECT_EQ(eval_error_kind("x = 1\n"), EvalErrorKind::MissingAnswer);
    EXPECT_EQ(eval_error_kind(""), EvalErrorKind::MissingAnswer);
    EXPECT_EQ(eval_error_kind("# only a comment\n"), EvalErrorKind::MissingAnswer);
}

TEST(MwpLang, RejectsConstructsOutsideTheSubset)
{
    for (const char* source : {
             "answer = 2 ** 3", "answer = 7 // 2", "answer = 7 % 2", "answer = max(1, 2)", "answer = 'a'",
             "answer = 1 < 2", "answer += 1", "import math", "print(answer)", "answer = (1 + 2",
             "answer = 1 + 2)", "answer = 1 +", "answer = +1", "answer 1", "= 3", "answer = 1 2",
             "if x:\n    answer = 1", "  answer = 1", "answer = 1.2.3", "answer = 12abc", "answer = 1;",
             "answer = \xc3\xa9", "answer = x == 1", "lambda = 3\nanswer = lambda",
         }) {
        SCOPED_TRACE(source);
        EXPECT_THROW(parse_program(source), ParseError);
    }
}

TEST(MwpLang, ParseErrorsCarryLineAndColumn)
{
    const auto e = parse_error("x = 1\ny = 2\nanswer = x ** y\n");
    EXPECT_EQ(e.line(), 3U);
    EXPECT_EQ(e.column(), 12U);
    EXPECT_FALSE(e.reason().empty());

    const auto kw = parse_error("answer = 1\nimport os\n");
    EXPECT_EQ(kw.line(), 2U);
    EXPECT_EQ(kw.column(), 1U);
}

TEST(MwpLang, StatementBound)
{
    std::string ok;
    for (std::size_t i = 0; i + 1 < kMaxStatements; ++i) {
        ok += "x = 1\n";
    }
    ok += "answer = x\n";
    EXPECT_DOUBLE_EQ(run(ok), 1.0);
    EXPECT_THROW(parse_program(ok + "answer = 2\n"), ParseError);
}

TEST(MwpLang, DepthBound)
{
    auto nested = [](std::size_t depth) {
        return "answer = " + std::string(depth, '(') + "1" + std::string(depth, ')');
    };
    EXPECT_NO_THROW(parse_program(nested(kMaxExprDepth - 2)));
    EXPECT_THROW(parse_program(nested(kMaxExprDepth + 1)), ParseError);

    std::string negations = "answer = " + std::string(10 * kMaxExprDepth, '-') + "1";
    EXPECT_THROW(parse_program(negations), ParseError);
    EXPECT_THROW(parse_program("answer = " + std::string(100000, '(')), ParseError);
}

TEST(MwpLang, ProgramIsACopyableValue)
{
    const Program original = parse_program("a = 2\nanswer = a * 21");
    const Program copy = original; // NOLINT
    EXPECT_DOUBLE_EQ(evaluate(copy), 42.0);
    EXPECT_TRUE(copy.assigns_answer());
    EXPECT_EQ(copy.statements().size(), 2U);
    EXPECT_EQ(copy.symbol(copy.statements()[1].target), "answer");
}

TEST(MwpLang, FormatIsCanonical)
{
    const auto program = parse_program("# c\nx=1.50\nanswer=( x+2 )*-x/3\n");
    EXPECT_EQ(format_program(program), "x = 1.5\nanswer = (x + 2) * -x / 3");
}

TEST(MwpLangProperty, FormatRoundTripsAndPreservesValue)
{
    std::mt19937_64 engine(20240611);
    ekt::testkit::GeneratorOptions options;
    options.error_rate = 0.0;
    for (int i = 0; i < 500; ++i) {
        const auto generated = ekt::testkit::generate_program(engine, options);
        const auto first = parse_program(generated.source);
        const std::string text = format_program(first);
        const auto second = parse_program(text);
        EXPECT_EQ(format_program(second), text);
        const auto ref_a = ekt::testkit::reference_evaluate(generated.source);
        const auto ref_b = ekt::testkit::reference_evaluate(text);
        ASSERT_EQ(ref_a.status, ref_b.status) << generated.source;
        if (ref_a.status == RefStatus::Value) {
            EXPECT_EQ(evaluate(first), evaluate(second));
        }
    }
}

TEST(MwpLangProperty, AgreesWithReferenceInterpreter)
{
    std::mt19937_64 engine(7);
    for (int i = 0; i < 2000; ++i) {
        const auto generated = ekt::testkit::generate_program(engine);
        const auto expected = ekt::testkit::reference_evaluate(generated.source);
        SCOPED_TRACE(generated.source);
        try {
            const double value = run(generated.source);
            ASSERT_EQ(expected.status, RefStatus::Value);
            EXPECT_EQ(value, expected.value);
        } catch (const ParseError&) {
            EXPECT_EQ(expected.status, RefStatus::SyntaxError);
        } catch (const EvalError& e) {
            switch (e.kind()) {
            case EvalErrorKind::UndefinedVariable:
                EXPECT_EQ(expected.status, RefStatus::UndefinedVariable);
                break;
            case EvalErrorKind::DivisionByZero:
                EXPECT_EQ(expected.status, RefStatus::DivisionByZero);
                break;
            case EvalErrorKind::NonFiniteResult:
                EXPECT_EQ(expected.status, RefStatus::NonFinite);
                break;
            case EvalErrorKind::MissingAnswer:
                EXPECT_EQ(expected.status, RefStatus::MissingAnswer);
                break;
            }
        }
    }
}

TEST(MwpLangProperty, NeverCrashesOnArbitraryBytes)
{
    std::mt19937_64 engine(99);
    const std::string alphabet = "ab_09.+-*/()= \n#\t'\"<%eE\x01\xff";
    for (int i = 0; i < 3000; ++i) {
        std::string text;
        const auto length = engine() % 60;
        for (std::size_t j = 0; j < length; ++j) {
            text += alphabet[engine() % alphabet.size()];
        }
        try {
            const double value = run(text);
            EXPECT_TRUE(std::isfinite(value));
        } catch (const ekt::Error&) {
        }
    }
}

} // namespace
