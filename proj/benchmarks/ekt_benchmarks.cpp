#include <map>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "ekt/evaluator.hpp"
#include "ekt/knowledge.hpp"
#include "ekt/mwp_lang.hpp"
#include "ekt/teacher_client.hpp"
#include "ekt/util.hpp"
#include "ekt/verifier.hpp"

namespace {

std::string chain_program(std::size_t statements)
{
    std::string out = "n0 = 4.0\n";
    for (std::size_t i = 1; i < statements; ++i) {
        out += "n" + std::to_string(i) + " = (n" + std::to_string(i - 1) + " + " + std::to_string(i) + ") / 2\n";
    }
    out += "answer = n" + std::to_string(statements - 1) + " * 3";
    return out;
}

void bm_parse(benchmark::State& state)
{
    const auto source = chain_program(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ekt::lang::parse_program(source));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_parse)->Arg(6)->Arg(20)->Arg(200);

void bm_evaluate(benchmark::State& state)
{
    const auto program = ekt::lang::parse_program(chain_program(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ekt::lang::evaluate(program));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_evaluate)->Arg(6)->Arg(20)->Arg(200);

void bm_verify_prompt_program(benchmark::State& state)
{
    const auto prompt = ekt::default_few_shot_prompt();
    const auto& program = prompt.examples().back().program;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ekt::verify(program, 35.0));
    }
}
BENCHMARK(bm_verify_prompt_program);

void bm_verify_rejects(benchmark::State& state)
{
    const std::string garbage = "import os\nanswer = os.system('x')";
    for (auto _ : state) {
        benchmark::DoNotOptimize(ekt::verify(garbage, 1.0));
    }
}
BENCHMARK(bm_verify_rejects);

void bm_pass_at_k_unbiased(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ekt::pass_at_k_unbiased(n, n / 10, n / 2));
    }
}
BENCHMARK(bm_pass_at_k_unbiased)->Arg(100)->Arg(1000)->Arg(10000);

void bm_acquire_mock(benchmark::State& state)
{
    std::vector<ekt::SpecExample> dataset;
    std::map<std::string, ekt::GeneratorSpec, std::less<>> script;
    for (int i = 0; i < 50; ++i) {
        dataset.push_back({"ex-" + std::to_string(i), "Question " + std::to_string(i), static_cast<double>(i)});
        script[dataset.back().id] = ekt::StochasticProgram{"answer = " + std::to_string(i), 0.1, "answer = -1"};
    }
    ekt::MockTeacher teacher(std::move(script), 1);
    ekt::SamplingConfig config;
    config.num_samples = 100;
    ekt::AcquisitionOptions options;
    options.workers = static_cast<std::size_t>(state.range(0));
    const auto prompt = ekt::default_few_shot_prompt();
    for (auto _ : state) {
        benchmark::DoNotOptimize(ekt::acquire_knowledge(dataset, teacher, prompt, config, 1, options));
    }
    state.SetItemsProcessed(state.iterations() * 50 * 100);
}
BENCHMARK(bm_acquire_mock)->Arg(1)->Arg(4);

} // namespace
BENCHMARK_MAIN();
