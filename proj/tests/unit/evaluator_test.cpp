#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ekt/errors.hpp"
#include "ekt/evaluator.hpp"
#include "pass_at_k_oracle.hpp"
#include "temp_dir.hpp"

namespace {

using namespace ekt;
using nlohmann::json;

const std::vector<SpecExample> kDataset = {{"a", "qa", 1.0}, {"b", "qb", 2.0}, {"c", "qc", 3.0}};

ExampleEvalResult result_with(std::string id, std::vector<bool> correct)
{
    ExampleEvalResult r;
    r.example_id = std::move(id);
    r.n_samples = correct.size();
    for (bool ok : correct) {
        r.outcomes.push_back(ok ? VerificationStatus::Correct : VerificationStatus::WrongAnswer);
        r.n_correct += ok ? 1 : 0;
    }
    return r;
}

TEST(EvaluateSamples, VerifiesEverySampleInDatasetOrder)
{
    const SampleMap samples{{"c", {"answer = 3", "answer = 1 / 0"}}, {"a", {"answer = 2", "answer = 1", "oops ="}}};
    const auto results = evaluate_samples(samples, kDataset);
    ASSERT_EQ(results.size(), 2U);
    EXPECT_EQ(results[0].example_id, "a");
    EXPECT_EQ(results[0].n_samples, 3U);
    EXPECT_EQ(results[0].n_correct, 1U);
    EXPECT_EQ(results[0].outcomes,
              (std::vector<VerificationStatus>{VerificationStatus::WrongAnswer, VerificationStatus::Correct,
                                               VerificationStatus::ParseFailure}));
    EXPECT_EQ(results[1].example_id, "c");
    EXPECT_EQ(results[1].outcomes[1], VerificationStatus::EvalFailure);
}

TEST(EvaluateSamples, RejectsUnknownIdsAndEmptyLists)
{
    EXPECT_THROW(evaluate_samples({{"zzz", {"answer = 1"}}}, kDataset), UnknownExampleId);
    EXPECT_THROW(evaluate_samples({{"a", {}}}, kDataset), EmptySampleList);
}

TEST(PassAtK, EmpiricalUsesFirstKSamples)
{
    const std::vector<ExampleEvalResult> results{result_with("a", {false, true, false}),
                                                 result_with("b", {false, false, false}),
                                                 result_with("c", {true, false, false})};
    EXPECT_DOUBLE_EQ(pass_at_k_empirical(results, 1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(pass_at_k_empirical(results, 2), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(pass_at_k_empirical(results, 3), 2.0 / 3.0);
    EXPECT_THROW(pass_at_k_empirical(results, 4), InsufficientSamples);
    EXPECT_THROW(pass_at_k_empirical(results, 0), std::invalid_argument);
    EXPECT_THROW(pass_at_k_empirical({}, 1), std::invalid_argument);
}

TEST(PassAtK, UnbiasedMatchesSubsetEnumeration)
{
    for (std::size_t n = 1; n <= 10; ++n) {
        for (std::size_t c = 0; c <= n; ++c) {
            for (std::size_t k = 1; k <= n; ++k) {
                EXPECT_NEAR(pass_at_k_unbiased(n, c, k), testkit::pass_at_k_by_enumeration(n, c, k), 1e-12)
                    << n << " " << c << " " << k;
            }
        }
    }
}

TEST(PassAtK, UnbiasedEdgeCasesAndDomain)
{
    EXPECT_EQ(pass_at_k_unbiased(100, 0, 100), 0.0);
    EXPECT_EQ(pass_at_k_unbiased(100, 1, 100), 1.0);
    EXPECT_EQ(pass_at_k_unbiased(100, 100, 1), 1.0);
    EXPECT_NEAR(pass_at_k_unbiased(100, 1, 1), 0.01, 1e-15);
    EXPECT_EQ(pass_at_k_unbiased(10, 8, 5), 1.0); // n - c < k
    EXPECT_THROW(pass_at_k_unbiased(5, 6, 1), DomainError);
    EXPECT_THROW(pass_at_k_unbiased(5, 1, 0), DomainError);
    EXPECT_THROW(pass_at_k_unbiased(5, 1, 6), DomainError);
    EXPECT_THROW(pass_at_k_unbiased(0, 0, 1), DomainError);
}

TEST(PassAtK, UnbiasedIsStableForLargeN)
{
    // Closed form via log-gamma as an independent check.
    for (std::size_t n : {200, 1000, 5000}) {
        for (std::size_t c : {1, 7, 50}) {
            for (std::size_t k : {1, 10, 100}) {
                const double log_ratio = std::lgamma(n - c + 1.0) - std::lgamma(n - c - k + 1.0) - std::lgamma(n + 1.0)
                                         + std::lgamma(n - k + 1.0);
                const double expected = 1.0 - std::exp(log_ratio);
                const double got = pass_at_k_unbiased(n, c, k);
                EXPECT_NEAR(got, expected, 1e-9) << n << " " << c << " " << k;
                EXPECT_GE(got, 0.0);
                EXPECT_LE(got, 1.0);
            }
        }
    }
}

TEST(PassAtKProperty, MonotoneInKAndC)
{
    for (std::size_t n = 1; n <= 60; ++n) {
        for (std::size_t c = 0; c <= n; ++c) {
            for (std::size_t k = 1; k <= n; ++k) {
                const double v = pass_at_k_unbiased(n, c, k);
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
                if (k + 1 <= n) {
                    ASSERT_LE(v, pass_at_k_unbiased(n, c, k + 1) + 1e-15);
                }
                if (c + 1 <= n) {
                    ASSERT_LE(v, pass_at_k_unbiased(n, c + 1, k) + 1e-15);
                }
            }
        }
    }
}

TEST(PassAtKProperty, UnbiasedIsTheExpectationOfEmpirical)
{
    // Averaging the empirical estimator over random orderings approaches the
    // unbiased value.
    std::mt19937_64 engine(8);
    std::vector<bool> base(12, false);
    std::fill(base.begin(), base.begin() + 4, true);
    double sum = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        std::shuffle(base.begin(), base.end(), engine);
        const std::vector<ExampleEvalResult> one{result_with("a", base)};
        sum += pass_at_k_empirical(one, 3);
    }
    EXPECT_NEAR(sum / trials, pass_at_k_unbiased(12, 4, 3), 0.015);
}

TEST(Report, BuildsBothEstimatorsAndSerializes)
{
    const std::vector<ExampleEvalResult> results{result_with("a", {false, true}), result_with("b", {false, false})};
    const std::vector<std::size_t> ks{1, 2};
    const auto empirical = build_report(results, ks, PassAtKEstimator::Empirical, DecodeMode{false, 0.6});
    EXPECT_DOUBLE_EQ(empirical.pass_at_k.at(1), 0.0);
    EXPECT_DOUBLE_EQ(empirical.pass_at_k.at(2), 0.5);
    const auto unbiased = build_report(results, ks, PassAtKEstimator::Unbiased, DecodeMode{false, 0.6});
    EXPECT_DOUBLE_EQ(unbiased.pass_at_k.at(1), 0.25);

    const auto doc = json::parse(eval_report_json(unbiased));
    EXPECT_EQ(doc["estimator"], "unbiased");
    EXPECT_EQ(doc["k_values"], json::array({1, 2}));
    EXPECT_DOUBLE_EQ(doc["pass_at_k"]["1"].get<double>(), 0.25);
    EXPECT_EQ(doc["decode_mode"]["mode"], "temperature");
    EXPECT_DOUBLE_EQ(doc["decode_mode"]["temperature"].get<double>(), 0.6);
    EXPECT_EQ(doc["per_example"].size(), 2U);

    const auto greedy = json::parse(eval_report_json(build_report(results, std::vector<std::size_t>{1},
                                                                  PassAtKEstimator::Empirical, DecodeMode{true, 0.0})));
    EXPECT_EQ(greedy["decode_mode"]["mode"], "greedy");

    EXPECT_EQ(parse_estimator("empirical"), PassAtKEstimator::Empirical);
    EXPECT_THROW(parse_estimator("magic"), std::invalid_argument);
}

TEST(SampleFile, RoundTripsAndValidatesIndices)
{
    testkit::TempDir dir;
    SampleFile file;
    file.meta = SampleFileMeta{"student", DecodeMode{false, 0.6}, 2, 4};
    file.samples["a"] = {"answer = 1", "answer = 2"};
    file.samples["b"] = {"answer = 3", "x ="};
    save_sample_file(file, dir / "s.jsonl");
    const auto loaded = load_sample_file(dir / "s.jsonl");
    EXPECT_EQ(loaded.samples, file.samples);
    EXPECT_EQ(loaded.meta.model_id, "student");
    EXPECT_EQ(loaded.meta.decode_mode, file.meta.decode_mode);
    EXPECT_EQ(loaded.meta.num_samples, 2U);

    const std::string meta = R"({"type":"meta","model_id":"m","decode_mode":"temperature","temperature":0.6,"num_samples":2,"seed":1})";
    std::ofstream(dir / "gap.jsonl") << meta << '\n'
                                     << R"({"type":"sample","example_id":"a","sample_index":0,"program":"x"})" << '\n'
                                     << R"({"type":"sample","example_id":"a","sample_index":2,"program":"y"})" << '\n';
    EXPECT_THROW(load_sample_file(dir / "gap.jsonl"), SchemaViolation);
    std::ofstream(dir / "dup.jsonl") << meta << '\n'
                                     << R"({"type":"sample","example_id":"a","sample_index":0,"program":"x"})" << '\n'
                                     << R"({"type":"sample","example_id":"a","sample_index":0,"program":"y"})" << '\n';
    EXPECT_THROW(load_sample_file(dir / "dup.jsonl"), SchemaViolation);
    std::ofstream(dir / "nometa.jsonl") << R"({"type":"sample","example_id":"a","sample_index":0,"program":"x"})" << '\n';
    EXPECT_THROW(load_sample_file(dir / "nometa.jsonl"), SchemaViolation);

    // Out-of-order lines are fine as long as indices are contiguous.
    std::ofstream(dir / "shuffled.jsonl") << meta << '\n'
                                          << R"({"type":"sample","example_id":"a","sample_index":1,"program":"y"})" << '\n'
                                          << R"({"type":"sample","example_id":"a","sample_index":0,"program":"x"})" << '\n';
    EXPECT_EQ(load_sample_file(dir / "shuffled.jsonl").samples.at("a"), (std::vector<std::string>{"x", "y"}));
}

} // namespace
