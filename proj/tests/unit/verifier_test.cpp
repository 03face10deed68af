#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "ekt/verifier.hpp"

namespace {

using namespace ekt;

TEST(Verifier, StatusNamesRoundTrip)
{
    for (auto status : {VerificationStatus::Correct, VerificationStatus::WrongAnswer,
                        VerificationStatus::ParseFailure, VerificationStatus::EvalFailure}) {
        EXPECT_EQ(parse_status(to_string(status)), status);
    }
    EXPECT_EQ(to_string(VerificationStatus::WrongAnswer), "wrong_answer");
    EXPECT_FALSE(parse_status("bogus").has_value());
}

TEST(Verifier, ClassifiesOutcomes)
{
    const auto correct = verify("answer = 6 * 7", 42.0);
    EXPECT_EQ(correct.status, VerificationStatus::Correct);
    EXPECT_TRUE(is_correct(correct));
    EXPECT_EQ(correct.produced_value, 42.0);

    const auto wrong = verify("answer = 6 * 7", 41.0);
    EXPECT_EQ(wrong.status, VerificationStatus::WrongAnswer);
    EXPECT_EQ(wrong.produced_value, 42.0);
    EXPECT_FALSE(is_correct(wrong));

    const auto parse = verify("answer = 2 ** 3", 8.0);
    EXPECT_EQ(parse.status, VerificationStatus::ParseFailure);
    EXPECT_FALSE(parse.produced_value.has_value());
    EXPECT_FALSE(parse.detail.empty());

    for (const char* source : {"answer = 1 / 0", "answer = y", "x = 1", "answer = 1e308 * 10"}) {
        const auto outcome = verify(source, 1.0);
        EXPECT_EQ(outcome.status, VerificationStatus::EvalFailure) << source;
        EXPECT_FALSE(outcome.produced_value.has_value());
    }
}

TEST(Verifier, ToleranceBoundary)
{
    const ToleranceSpec tol;
    // Small answers: the absolute term dominates, bound is 2e-6.
    EXPECT_TRUE(tol.accepts(1.0 + 1.5e-6, 1.0));
    EXPECT_FALSE(tol.accepts(1.0 + 2.5e-6, 1.0));
    // Large answers scale: 1e6 allows 1 + 1e-6.
    EXPECT_TRUE(tol.accepts(1e6 + 0.9, 1e6));
    EXPECT_FALSE(tol.accepts(1e6 + 1.1, 1e6));
    EXPECT_TRUE(tol.accepts(-3.0, -3.0));
    EXPECT_FALSE(tol.accepts(3.0, -3.0));
}

TEST(Verifier, FloatingRationalsMatchIntegers)
{
    EXPECT_TRUE(is_correct(verify("answer = 0.1 + 0.2", 0.3)));
    EXPECT_TRUE(is_correct(verify("answer = 10 / 3 * 3", 10.0)));
    EXPECT_TRUE(is_correct(verify("answer = 1 / 3", 0.333333)));
}

TEST(Verifier, RejectsNonFiniteExpected)
{
    EXPECT_THROW(verify("answer = 1", std::numeric_limits<double>::infinity()), std::invalid_argument);
    EXPECT_THROW(verify("answer = 1", std::nan("")), std::invalid_argument);
}

TEST(Verifier, CheckerUsesItsTolerance)
{
    const ArithmeticChecker loose(ToleranceSpec{0.5, 0.0});
    EXPECT_TRUE(is_correct(loose.check("answer = 10.4", 10.0)));
    const ArithmeticChecker strict(ToleranceSpec{0.0, 0.0});
    EXPECT_FALSE(is_correct(strict.check("answer = 0.1 + 0.2", 0.3)));
}

TEST(VerifierProperty, ToleranceIsSymmetricInSignAndMonotone)
{
    std::mt19937_64 engine(3);
    std::uniform_real_distribution<double> value(-1e7, 1e7);
    std::uniform_real_distribution<double> delta(0.0, 5.0);
    const ToleranceSpec tol;
    for (int i = 0; i < 10000; ++i) {
        const double z = value(engine);
        const double d = delta(engine) * 1e-6 * std::max(1.0, std::abs(z));
        EXPECT_EQ(tol.accepts(z + d, z), tol.accepts(-z - d, -z));
        if (tol.accepts(z + d, z)) {
            EXPECT_TRUE(tol.accepts(z + d / 2, z));
        }
        EXPECT_TRUE(tol.accepts(z, z));
    }
}

} // namespace
