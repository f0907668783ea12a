#include <benchmark/benchmark.h>

#include <string>

#include "relaylab/backend.hpp"
#include "relaylab/fixtures.hpp"
#include "relaylab/frame_fidelity.hpp"
#include "relaylab/lexical_metrics.hpp"
#include "relaylab/stats.hpp"
#include "relaylab/survival.hpp"
#include "relaylab/text_match.hpp"

namespace {

using namespace relaylab;

void bench_tokenize(benchmark::State& state) {
    const std::string text = fixtures::load_source_text("study1_source");
    for (auto _ : state) {
        benchmark::DoNotOptimize(text::tokenize(text));
    }
}
BENCHMARK(bench_tokenize);

void bench_detect_elements(benchmark::State& state) {
    const std::string text = fixtures::load_source_text("study1_source");
    const auto catalog = fixtures::load_element_catalog();
    for (auto _ : state) {
        benchmark::DoNotOptimize(survival::detect_elements(text, catalog));
    }
}
BENCHMARK(bench_detect_elements);

void bench_density(benchmark::State& state) {
    const std::string text = fixtures::load_source_text("study3_source");
    const auto lexicons = fixtures::load_lexicons();
    const auto& framework = lexicons.at("framework");
    for (auto _ : state) {
        benchmark::DoNotOptimize(lexical::density(text, framework));
    }
}
BENCHMARK(bench_density);

void bench_fidelity(benchmark::State& state) {
    const std::string text = fixtures::load_source_text("study4_housing_competitive");
    const auto frames = fixtures::load_frames("housing");
    for (auto _ : state) {
        double total = 0.0;
        for (const auto& frame : frames) total += frames::fidelity(text, frame);
        benchmark::DoNotOptimize(total);
    }
}
BENCHMARK(bench_fidelity);

void bench_degrader_step(benchmark::State& state) {
    const std::string text = fixtures::load_source_text("study1_source");
    DegraderConfig config;
    config.unit_kind = DegraderUnitKind::element_pattern;
    config.units = survival::degrader_units(fixtures::load_element_catalog());
    config.default_drop_probability = 0.05;
    config.seed = 42;
    DegraderBackend backend(config);
    PromptRequest request;
    request.payload_text = text;
    for (auto _ : state) {
        benchmark::DoNotOptimize(backend.complete(request));
    }
}
BENCHMARK(bench_degrader_step);

void bench_t_p_value(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(stats::student_t_p_two_sided(2.5, 99.0));
    }
}
BENCHMARK(bench_t_p_value);

void bench_similarity(benchmark::State& state) {
    const std::string a = fixtures::load_source_text("study1_source");
    const std::string b = fixtures::load_source_text("study3_source");
    for (auto _ : state) {
        benchmark::DoNotOptimize(survival::similarity(a, b));
    }
}
BENCHMARK(bench_similarity);

}  // namespace

BENCHMARK_MAIN();
