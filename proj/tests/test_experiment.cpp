#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relaylab/backend.hpp"
#include "relaylab/chain.hpp"
#include "relaylab/csv.hpp"
#include "relaylab/experiment.hpp"
#include "relaylab/fixtures.hpp"
#include "relaylab/text_match.hpp"
#include "support/backends.hpp"
#include "support/rule_judge.hpp"

using namespace relaylab;
namespace ex = relaylab::experiment;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag)
        : path(std::filesystem::temp_directory_path() /
               ("relaylab_expr_" + tag + "_" + std::to_string(::getpid()))) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string cell(const csv::Table& table, const csv::Row& row, const std::string& column) {
    return row[table.column(column)];
}

csv::Table read_table(const std::filesystem::path& path) {
    REQUIRE(std::filesystem::exists(path));
    return csv::read_file(path);
}

}  // namespace

TEST_CASE("config parsing fills every default") {
    const auto config = ex::parse_config(
        R"({"study": "custom", "sources": [{"id": "a", "text": "hello there"}]})", "/base");

    CHECK(config.study == "custom");
    CHECK(config.experiment_id == "custom");
    CHECK(config.backend.kind == BackendKind::echo);
    CHECK(config.chain.n_steps == 100);
    CHECK(config.chain.recover);
    CHECK(config.chain.transmit_instruction == chain::default_transmit_instruction());
    CHECK(config.chain.recover_instruction == chain::default_recover_instruction());
    CHECK(config.chain.temperature == doctest::Approx(1.0));
    CHECK_FALSE(config.chain.max_output_tokens.has_value());
    CHECK(config.n_runs == 100);
    CHECK(config.base_seed == 0);
    CHECK(config.rate_limit == doctest::Approx(0.0));
    CHECK(config.store_dir == std::filesystem::path("/base/runs/custom"));
    CHECK(config.output_dir == std::filesystem::path("/base/analysis/custom"));
    CHECK(config.cache_dir.empty());
    REQUIRE(config.sources.size() == 1);
    CHECK(config.sources[0].id == "a");
    CHECK(config.sources[0].text == "hello there");
    CHECK_FALSE(config.judge.configured);
    CHECK(config.judge.temperature == doctest::Approx(0.1));
    CHECK(config.judge.metrics.empty());
    CHECK(config.judge.timepoints.empty());
}

TEST_CASE("config parsing honours every explicit field") {
    const std::string body = R"({
        "study": "study2",
        "experiment": "exp-7",
        "backend": {
            "kind": "http-chat",
            "endpoint": "http://127.0.0.1:9/v1/chat",
            "model": "relay-model",
            "temperature": 0.25,
            "api_key_env": "MY_KEY",
            "retry": {"max_attempts": 5, "base_delay_ms": 10}
        },
        "chain": {
            "steps": 12,
            "recover": false,
            "transmit_instruction": "pass it on",
            "recover_instruction": "explain it",
            "temperature": 0.3,
            "max_output_tokens": 256
        },
        "runs": 5,
        "seed": 99,
        "rate_limit": 2.5,
        "store": "/abs/store",
        "output": "rel/out",
        "cache": "cachedir",
        "sources": [{"id": "one", "text": "Some text."}],
        "judge": {
            "backend": {"kind": "echo"},
            "temperature": 0.05,
            "retry": {"max_attempts": 2, "base_delay_ms": 1},
            "timepoints": [3, 1, 3],
            "metrics": ["assertiveness"]
        }
    })";
    const auto config = ex::parse_config(body, "/base");

    CHECK(config.experiment_id == "exp-7");
    CHECK(config.backend.kind == BackendKind::http_chat);
    CHECK(config.backend.endpoint == "http://127.0.0.1:9/v1/chat");
    CHECK(config.backend.model_id == "relay-model");
    CHECK(config.backend.default_temperature == doctest::Approx(0.25));
    CHECK(config.backend.api_key_env == "MY_KEY");
    CHECK(config.backend.retry.max_attempts == 5);
    CHECK(config.backend.retry.base_delay == std::chrono::milliseconds(10));
    CHECK(config.chain.n_steps == 12);
    CHECK_FALSE(config.chain.recover);
    CHECK(config.chain.transmit_instruction == "pass it on");
    CHECK(config.chain.recover_instruction == "explain it");
    CHECK(config.chain.temperature == doctest::Approx(0.3));
    CHECK(config.chain.max_output_tokens == 256);
    CHECK(config.n_runs == 5);
    CHECK(config.base_seed == 99);
    CHECK(config.rate_limit == doctest::Approx(2.5));
    CHECK(config.store_dir == std::filesystem::path("/abs/store"));
    CHECK(config.output_dir == std::filesystem::path("/base/rel/out"));
    CHECK(config.cache_dir == std::filesystem::path("/base/cachedir"));
    CHECK(config.judge.configured);
    CHECK(config.judge.backend.kind == BackendKind::echo);
    CHECK(config.judge.temperature == doctest::Approx(0.05));
    CHECK(config.judge.retry.max_attempts == 2);
    CHECK(config.judge.timepoints == std::vector<int>{1, 3});
    CHECK(config.judge.metrics == std::vector<std::string>{"assertiveness"});
}

TEST_CASE("config parsing understands degrader backends") {
    const std::string body = R"({
        "study": "custom",
        "sources": [{"id": "a", "text": "x. y."}],
        "backend": {
            "kind": "degrader",
            "degrader": {
                "unit": "element-pattern",
                "drop_probability": 0.25,
                "per_unit": {"u1": 0.0},
                "seed": 42,
                "units": [{"id": "u1", "patterns": ["alpha", "beta"]}]
            }
        }
    })";
    const auto config = ex::parse_config(body, {});
    CHECK(config.backend.kind == BackendKind::degrader);
    CHECK(config.backend.degrader.unit_kind == DegraderUnitKind::element_pattern);
    CHECK(config.backend.degrader.default_drop_probability == doctest::Approx(0.25));
    CHECK(config.backend.degrader.per_unit_drop_probability.at("u1") == doctest::Approx(0.0));
    CHECK(config.backend.degrader.seed == 42);
    REQUIRE(config.backend.degrader.units.size() == 1);
    CHECK(config.backend.degrader.units[0].id == "u1");
    CHECK(config.backend.degrader.units[0].patterns ==
          std::vector<std::string>{"alpha", "beta"});

    const std::string with_catalog = R"({
        "study": "custom",
        "sources": [{"id": "a", "text": "x."}],
        "backend": {"kind": "degrader",
                    "degrader": {"unit": "element-pattern", "catalog": "study1_elements"}}
    })";
    const auto bundled = ex::parse_config(with_catalog, {});
    CHECK(bundled.backend.degrader.units.size() == 26);
}

TEST_CASE("config parsing rejects malformed documents") {
    auto reject = [](const std::string& body) {
        CHECK_THROWS_AS(ex::parse_config(body, {}), ex::ConfigError);
    };
    reject("{");
    reject("[]");
    reject(R"({"study": "study99"})");
    reject(R"({"study": 3})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "chain": {"steps": 0}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "chain": {"steps": "9"}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "chain": {"recover": 1}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "chain": {"temperature": "hot"}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "runs": 0})");
    reject(R"({"study": "custom", "sources": {}})");
    reject(R"({"study": "custom", "sources": [{"text": "x"}]})");
    reject(R"({"study": "custom", "sources": [{"id": "a"}]})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": ""}]})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}, {"id": "a", "text": "y"}]})");
    reject(R"({"study": "custom"})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "file": "missing_source.txt"}]})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "fixture": "no_such_text"}]})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "backend": {}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "backend": {"kind": "carrier-pigeon"}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "backend": {"kind": "http-chat"}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "backend": {"kind": "echo", "retry": {"max_attempts": 0}}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}],
               "backend": {"kind": "degrader", "degrader": {"unit": "paragraph"}}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}],
               "backend": {"kind": "degrader", "degrader": {"per_unit": [1]}}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}], "judge": []})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}],
               "judge": {"metrics": ["sarcasm"]}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}],
               "judge": {"metrics": ["valence"], "timepoints": [-1]}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}],
               "chain": {"steps": 5, "recover": false},
               "judge": {"metrics": ["valence"], "timepoints": [6]}})");
    reject(R"({"study": "custom", "sources": [{"id": "a", "text": "x"}],
               "judge": {"metrics": ["valence"], "timepoints": 3}})");

    CHECK_THROWS_AS(ex::load_config("/no/such/config.json"), ex::ConfigError);
}

TEST_CASE("judge timepoints beyond the final step are accepted only with recovery") {
    const std::string body = R"({
        "study": "custom",
        "sources": [{"id": "a", "text": "x"}],
        "chain": {"steps": 5, "recover": true},
        "judge": {"metrics": ["valence"], "timepoints": [6, 0]}
    })";
    const auto config = ex::parse_config(body, {});
    CHECK(config.judge.timepoints == std::vector<int>{0, 6});
}

TEST_CASE("study presets resolve their bundled sources") {
    auto ids = [](const std::string& study) {
        std::vector<std::string> out;
        for (const auto& s : ex::study_sources(study)) {
            CHECK_FALSE(s.text.empty());
            out.push_back(s.id);
        }
        return out;
    };

    CHECK(ids("study1") == std::vector<std::string>{"riverside"});
    CHECK(ids("study2") ==
          std::vector<std::string>{"level01", "level02", "level03", "level04", "level05",
                                   "level06", "level07", "level08", "level09", "level10"});
    CHECK(ids("study3") == std::vector<std::string>{"privacy"});
    CHECK(ids("study4-competitive") == std::vector<std::string>{"housing", "speech"});
    CHECK(ids("study4-solo") ==
          std::vector<std::string>{"housing_A", "housing_B", "housing_C", "housing_D",
                                   "speech_A", "speech_B", "speech_C", "speech_D"});
    CHECK(ids("study5a-solo") ==
          std::vector<std::string>{"intensity1", "intensity2", "intensity3", "intensity4",
                                   "intensity5"});
    CHECK(ids("study5a-competitive") == std::vector<std::string>{"competitive"});
    CHECK(ids("study5b") ==
          std::vector<std::string>{"anger", "anxiety", "joy", "hope", "disgust"});
    CHECK(ex::study_sources("custom").empty());
    CHECK_THROWS_AS(ex::study_sources("study9"), ex::ConfigError);

    const auto study1 = ex::study_sources("study1");
    CHECK(study1[0].text == fixtures::load_source_text("study1_source"));
}

TEST_CASE("judge defaults follow the study design") {
    CHECK(ex::default_judge_metrics("study1").empty());
    CHECK(ex::default_judge_metrics("study2") == std::vector<std::string>{"assertiveness"});
    CHECK(ex::default_judge_metrics("study3") ==
          std::vector<std::string>{"framework", "advocacy"});
    CHECK(ex::default_judge_metrics("study4-solo").empty());
    CHECK(ex::default_judge_metrics("study5a-solo") ==
          std::vector<std::string>{"intensity", "valence"});
    CHECK(ex::default_judge_metrics("study5a-competitive") ==
          std::vector<std::string>{"intensity", "valence"});
    CHECK(ex::default_judge_metrics("study5b") == std::vector<std::string>{"emotion"});
    CHECK(ex::default_judge_metrics("custom").empty());

    using ivec = std::vector<int>;
    CHECK(ex::default_judge_timepoints("study2", 100, true) ==
          ivec{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 101});
    CHECK(ex::default_judge_timepoints("study2", 25, false) == ivec{0, 10, 20, 25});
    CHECK(ex::default_judge_timepoints("study2", 5, true) == ivec{0, 5, 6});
    CHECK(ex::default_judge_timepoints("study3", 100, true) == ivec{0, 25, 50, 75, 100});
    CHECK(ex::default_judge_timepoints("study3", 60, false) == ivec{0, 25, 50, 60});
    CHECK(ex::default_judge_timepoints("study5a-solo", 100, true) ==
          ivec{0, 10, 25, 50, 75, 100, 101});
    CHECK(ex::default_judge_timepoints("study5a-competitive", 30, false) == ivec{0, 10, 25, 30});
    CHECK(ex::default_judge_timepoints("study5b", 40, false) == ivec{0, 10, 20, 30, 40});
    CHECK(ex::default_judge_timepoints("study1", 100, true).empty());
    CHECK(ex::default_judge_timepoints("custom", 100, true).empty());
}

TEST_CASE("plans mirror the experiment configuration") {
    const auto config = ex::parse_config(R"({
        "study": "custom",
        "experiment": "mirror",
        "chain": {"steps": 7, "recover": false, "temperature": 0.4},
        "runs": 9,
        "seed": 1234,
        "sources": [{"id": "a", "text": "First."}, {"id": "b", "text": "Second."}]
    })", {});
    const auto plan = ex::make_plan(config);
    CHECK(plan.experiment_id == "mirror");
    REQUIRE(plan.sources.size() == 2);
    CHECK(plan.sources[0] == std::make_pair(std::string("a"), std::string("First.")));
    CHECK(plan.sources[1] == std::make_pair(std::string("b"), std::string("Second.")));
    CHECK(plan.chain.n_steps == 7);
    CHECK_FALSE(plan.chain.recover);
    CHECK(plan.chain.temperature == doctest::Approx(0.4));
    CHECK(plan.n_runs == 9);
    CHECK(plan.base_seed == 1234);
}

TEST_CASE("config files load with paths resolved against their own directory") {
    TempDir dir("loadcfg");
    {
        std::ofstream src(dir.path / "seed_text.txt", std::ios::binary);
        src << "A short seed text.";
    }
    {
        std::ofstream cfg(dir.path / "config.json", std::ios::binary);
        cfg << R"({
            "study": "custom",
            "experiment": "fromfile",
            "store": "s",
            "sources": [{"id": "a", "file": "seed_text.txt"}]
        })";
    }
    const auto config = ex::load_config(dir.path / "config.json");
    CHECK(config.store_dir == dir.path / "s");
    CHECK(config.output_dir == dir.path / "analysis" / "fromfile");
    REQUIRE(config.sources.size() == 1);
    CHECK(config.sources[0].text == "A short seed text.");
}

TEST_CASE("run command executes a plan, skips finished work, and guards the store") {
    TempDir dir("runcmd");
    const std::string body = R"({
        "study": "custom",
        "experiment": "echo-run",
        "chain": {"steps": 3},
        "runs": 4,
        "seed": 17,
        "store": "store",
        "output": "out",
        "sources": [{"id": "alpha", "text": "One fact. Two facts. Three facts."}]
    })";
    const auto config = ex::parse_config(body, dir.path);

    std::ostringstream log;
    CHECK(ex::cmd_run(config, {}, log) == ex::kExitSuccess);
    CHECK(log.str().find("runs completed: 4") != std::string::npos);
    CHECK(std::filesystem::exists(dir.path / "store" / "manifest.json"));
    for (int run = 1; run <= 4; ++run) {
        CHECK(std::filesystem::exists(dir.path / "store" / "alpha" /
                                      ("run_000" + std::to_string(run) + ".ndjson")));
    }

    std::ostringstream again;
    CHECK(ex::cmd_run(config, {}, again) == ex::kExitSuccess);
    CHECK(again.str().find("already done: 4") != std::string::npos);

    auto reshaped = config;
    reshaped.chain.n_steps = 4;
    std::ostringstream mismatch;
    CHECK(ex::cmd_run(reshaped, {}, mismatch) == ex::kExitConfig);
    CHECK(mismatch.str().find("config error") != std::string::npos);
}

TEST_CASE("run command distinguishes total failure, partial progress, and resume") {
    const std::string body = R"({
        "study": "custom",
        "experiment": "budgeted",
        "chain": {"steps": 3},
        "runs": 4,
        "seed": 3,
        "store": "store",
        "output": "out",
        "sources": [{"id": "alpha", "text": "One fact. Two facts. Three facts."}]
    })";

    SUBCASE("every run failing yields the backend exit code") {
        TempDir dir("runfail");
        const auto config = ex::parse_config(body, dir.path);
        testsupport::CallBudgetBackend dead(0);
        std::ostringstream log;
        CHECK(ex::cmd_run(config, {}, log, &dead) == ex::kExitBackend);
        CHECK(log.str().find("failed: 4") != std::string::npos);
        CHECK(log.str().find("alpha/run_0001: budget exhausted") != std::string::npos);
    }

    SUBCASE("a mid-run budget failure leaves completed runs standing") {
        TempDir dir("runmid");
        const auto config = ex::parse_config(body, dir.path);
        testsupport::CallBudgetBackend tight(5);
        std::ostringstream log;
        CHECK(ex::cmd_run(config, {}, log, &tight) == ex::kExitPartial);
        CHECK(log.str().find("runs completed: 1") != std::string::npos);
        CHECK(log.str().find("failed: 3") != std::string::npos);
    }

    SUBCASE("batched invocations require an explicit resume") {
        TempDir dir("runbatch");
        const auto config = ex::parse_config(body, dir.path);
        EchoBackend echo;

        chain::ExecutionOptions first;
        first.max_runs_this_invocation = 2;
        std::ostringstream log1;
        CHECK(ex::cmd_run(config, first, log1, &echo) == ex::kExitPartial);
        CHECK(log1.str().find("runs completed: 2") != std::string::npos);
        CHECK(log1.str().find("not attempted: 2") != std::string::npos);

        std::ostringstream log2;
        CHECK(ex::cmd_run(config, {}, log2, &echo) == ex::kExitPartial);
        CHECK(log2.str().find("resume") != std::string::npos);

        chain::ExecutionOptions rest;
        rest.resume = true;
        std::ostringstream log3;
        CHECK(ex::cmd_run(config, rest, log3, &echo) == ex::kExitSuccess);
        CHECK(log3.str().find("runs completed: 2") != std::string::npos);
        CHECK(log3.str().find("already done: 2") != std::string::npos);
    }
}

TEST_CASE("run command throttles backend calls when a rate limit is configured") {
    TempDir dir("runrate");
    const auto config = ex::parse_config(R"({
        "study": "custom",
        "experiment": "throttled",
        "chain": {"steps": 2, "recover": false},
        "runs": 2,
        "rate_limit": 150.0,
        "store": "store",
        "output": "out",
        "sources": [{"id": "alpha", "text": "Tick. Tock."}]
    })", dir.path);

    testsupport::CountingEchoBackend counting;
    std::ostringstream log;
    const auto start = std::chrono::steady_clock::now();
    CHECK(ex::cmd_run(config, {}, log, &counting) == ex::kExitSuccess);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() >= 15);
}

TEST_CASE("analyze writes flat word and similarity series for echo chains") {
    TempDir dir("anecho");
    const std::string source_text = "The quick brown fox jumps over the lazy dog today.";
    const auto config = ex::parse_config(R"({
        "study": "custom",
        "experiment": "an-echo",
        "chain": {"steps": 3},
        "runs": 4,
        "store": "store",
        "output": "out",
        "sources": [{"id": "alpha", "text": ")" + source_text + R"("}]
    })", dir.path);

    std::ostringstream run_log;
    REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);
    std::ostringstream log;
    CHECK(ex::cmd_analyze(config, log) == ex::kExitSuccess);
    CHECK(log.str().find("analyzed 4 complete runs") != std::string::npos);

    const auto words = read_table(dir.path / "out" / "word_count.csv");
    CHECK(words.header == csv::Row{"run", "t", "words"});
    CHECK(words.rows.size() == 4 * 5);
    const std::string expected_words = std::to_string(text::word_count(source_text));
    std::set<std::string> seen_t;
    for (const auto& row : words.rows) {
        CHECK(cell(words, row, "words") == expected_words);
        seen_t.insert(cell(words, row, "t"));
    }
    CHECK(seen_t == std::set<std::string>{"0", "1", "2", "3", "4"});

    const auto sim = read_table(dir.path / "out" / "similarity.csv");
    CHECK(sim.rows.size() == 4 * 5);
    for (const auto& row : sim.rows) CHECK(cell(sim, row, "similarity") == "1");
}

TEST_CASE("analyze demands an existing store with at least one complete run") {
    TempDir dir("annone");
    const auto config = ex::parse_config(R"({
        "study": "custom",
        "experiment": "an-none",
        "store": "store",
        "output": "out",
        "sources": [{"id": "alpha", "text": "Something."}]
    })", dir.path);

    std::ostringstream missing;
    CHECK(ex::cmd_analyze(config, missing) == ex::kExitConfig);
    CHECK(missing.str().find("no trajectory store") != std::string::npos);

    std::filesystem::create_directories(config.store_dir);
    std::ostringstream empty;
    CHECK(ex::cmd_analyze(config, empty) == ex::kExitConfig);
    CHECK(empty.str().find("no complete runs") != std::string::npos);
}

TEST_CASE("analyze emits the survival suite for the narrative study") {
    TempDir dir("ansurv");
    const auto config = ex::parse_config(R"({
        "study": "study1",
        "experiment": "an-surv",
        "chain": {"steps": 2},
        "runs": 3,
        "store": "store",
        "output": "out"
    })", dir.path);

    std::ostringstream run_log;
    REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);
    std::ostringstream log;
    REQUIRE(ex::cmd_analyze(config, log) == ex::kExitSuccess);

    const auto presence = read_table(dir.path / "out" / "survival.csv");
    CHECK(presence.rows.size() == 3u * 3u * 26u);
    for (const auto& row : presence.rows) CHECK(cell(presence, row, "present") == "1");

    const auto curve = read_table(dir.path / "out" / "survival_curve.csv");
    REQUIRE(curve.rows.size() == 3);
    for (const auto& row : curve.rows) {
        CHECK(cell(curve, row, "mean_count") == "26");
        CHECK(cell(curve, row, "ci_lo") == "26");
        CHECK(cell(curve, row, "ci_hi") == "26");
        CHECK(cell(curve, row, "n_runs") == "3");
    }

    const auto tiers = read_table(dir.path / "out" / "tier_curves.csv");
    std::map<std::string, std::set<std::string>> tier_means;
    for (const auto& row : tiers.rows) {
        tier_means[cell(tiers, row, "tier")].insert(cell(tiers, row, "mean_count"));
    }
    CHECK(tier_means.at("narrative-anchor") == std::set<std::string>{"6"});
    CHECK(tier_means.at("temporal-marker") == std::set<std::string>{"4"});
    CHECK(tier_means.at("evidentiary-detail") == std::set<std::string>{"11"});
    CHECK(tier_means.at("epistemic-qualifier") == std::set<std::string>{"5"});

    const auto elements = read_table(dir.path / "out" / "element_curves.csv");
    CHECK(elements.rows.size() == 26u * 3u);
    for (const auto& row : elements.rows) CHECK(cell(elements, row, "survival") == "1");

    const auto half = read_table(dir.path / "out" / "half_life.csv");
    CHECK(half.rows.size() == 26);
    for (const auto& row : half.rows) {
        CHECK(cell(half, row, "half_life") == "2");
        CHECK(cell(half, row, "censored") == "1");
    }

    const auto recovery = read_table(dir.path / "out" / "recovery.csv");
    CHECK(recovery.rows.size() == 3);
    for (const auto& row : recovery.rows) {
        CHECK(cell(recovery, row, "element_delta") == "0");
        CHECK(cell(recovery, row, "word_delta") == "0");
    }
}

TEST_CASE("analyze emits lexical marker series for the framework study") {
    TempDir dir("anlex");
    const auto config = ex::parse_config(R"({
        "study": "study3",
        "experiment": "an-lex",
        "chain": {"steps": 1},
        "runs": 2,
        "store": "store",
        "output": "out"
    })", dir.path);

    std::ostringstream run_log;
    REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);
    std::ostringstream log;
    REQUIRE(ex::cmd_analyze(config, log) == ex::kExitSuccess);

    const auto lex = read_table(dir.path / "out" / "lexical.csv");
    CHECK(lex.rows.size() == 2u * 3u * 7u);
    std::set<std::string> metrics;
    std::map<std::string, std::set<std::string>> values_by_metric;
    for (const auto& row : lex.rows) {
        metrics.insert(cell(lex, row, "metric"));
        values_by_metric[cell(lex, row, "metric")].insert(cell(lex, row, "value"));
    }
    CHECK(metrics == std::set<std::string>{"framework_density", "perspectival_density",
                                           "instructional_density", "tension_density",
                                           "structures", "perspective_count", "tradeoff"});
    for (const auto& [metric, values] : values_by_metric) {
        CHECK(values.size() == 1);
    }
}

TEST_CASE("analyze emits fidelity tables for the framing studies") {
    TempDir dir("anfid");
    const auto config = ex::parse_config(R"({
        "study": "study4-competitive",
        "experiment": "an-fid",
        "chain": {"steps": 1, "recover": false},
        "runs": 2,
        "store": "store",
        "output": "out"
    })", dir.path);

    std::ostringstream run_log;
    REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);
    std::ostringstream log;
    REQUIRE(ex::cmd_analyze(config, log) == ex::kExitSuccess);

    const auto fid = read_table(dir.path / "out" / "fidelity.csv");
    CHECK(fid.rows.size() == 2u * 2u * 2u * 4u);
    std::map<std::string, std::set<std::string>> by_run_frame;
    for (const auto& row : fid.rows) {
        by_run_frame[cell(fid, row, "run") + "#" + cell(fid, row, "frame")].insert(
            cell(fid, row, "fidelity"));
    }
    for (const auto& [key, values] : by_run_frame) {
        CHECK(values.size() == 1);
    }

    const auto agg = read_table(dir.path / "out" / "fidelity_aggregates.csv");
    CHECK(agg.rows.size() == 2u * 2u * 2u);
    CHECK(agg.header == csv::Row{"run", "t", "issue", "strong", "weak", "strength_gap", "pro",
                                 "con", "direction_gap"});

    const auto gaps = read_table(dir.path / "out" / "gap_tests.csv");
    REQUIRE(gaps.rows.size() == 4);
    std::set<std::string> seen;
    for (const auto& row : gaps.rows) {
        seen.insert(cell(gaps, row, "issue") + "#" + cell(gaps, row, "comparison"));
        CHECK(cell(gaps, row, "t") == "1");
    }
    CHECK(seen == std::set<std::string>{"housing#strong_vs_weak", "housing#pro_vs_con",
                                        "speech#strong_vs_weak", "speech#pro_vs_con"});
}

TEST_CASE("judge command scores stored texts, caches responses, and feeds analysis") {
    TempDir dir("judgecmd");
    const auto config = ex::parse_config(R"({
        "study": "study2",
        "experiment": "exp-judge",
        "chain": {"steps": 4, "recover": false},
        "runs": 2,
        "seed": 5,
        "store": "store",
        "output": "out",
        "cache": "cache",
        "sources": [
            {"id": "plain", "text": "The committee will approve the budget. The plan works."},
            {"id": "hedged", "text": "The committee might approve the budget. It may help, perhaps."}
        ]
    })", dir.path);
    CHECK(config.judge.metrics == std::vector<std::string>{"assertiveness"});
    CHECK(config.judge.timepoints == std::vector<int>{0, 4});

    std::ostringstream run_log;
    REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);

    testsupport::RuleJudgeBackend rule;
    std::ostringstream log;
    REQUIRE(ex::cmd_judge(config, 1, log, &rule) == ex::kExitSuccess);
    CHECK(rule.call_log().calls == 2);
    CHECK(log.str().find("judged 8 texts") != std::string::npos);
    CHECK(log.str().find("0 missing") != std::string::npos);

    const auto judged = read_table(dir.path / "out" / "judged.csv");
    CHECK(judged.header == csv::Row{"run", "t", "metric", "value"});
    REQUIRE(judged.rows.size() == 8);
    CHECK(judged.rows[0] == csv::Row{"plain/run_0001", "0", "assertiveness", "10"});
    std::map<std::string, std::set<std::string>> by_source;
    for (const auto& row : judged.rows) {
        CHECK(cell(judged, row, "metric") == "assertiveness");
        const std::string run_id = cell(judged, row, "run");
        by_source[run_id.substr(0, run_id.find('/'))].insert(cell(judged, row, "value"));
    }
    CHECK(by_source.at("plain") == std::set<std::string>{"10"});
    CHECK(by_source.at("hedged") == std::set<std::string>{"4"});

    const std::string first_bytes = read_bytes(dir.path / "out" / "judged.csv");
    testsupport::RuleJudgeBackend rule_again;
    std::ostringstream log2;
    REQUIRE(ex::cmd_judge(config, 1, log2, &rule_again) == ex::kExitSuccess);
    CHECK(rule_again.call_log().calls == 0);
    CHECK(read_bytes(dir.path / "out" / "judged.csv") == first_bytes);

    std::ostringstream analyze_log;
    REQUIRE(ex::cmd_analyze(config, analyze_log) == ex::kExitSuccess);

    const auto summary = read_table(dir.path / "out" / "judged_summary.csv");
    REQUIRE(summary.rows.size() == 4);
    std::map<std::string, csv::Row> by_key;
    for (const auto& row : summary.rows) {
        by_key[cell(summary, row, "source") + "@" + cell(summary, row, "t")] = row;
    }
    const auto& plain0 = by_key.at("plain@0");
    CHECK(cell(summary, plain0, "n") == "2");
    CHECK(cell(summary, plain0, "mean") == "10");
    CHECK(cell(summary, plain0, "sd") == "0");
    CHECK(cell(summary, plain0, "ci_lo") == "10");
    CHECK(cell(summary, plain0, "ci_hi") == "10");
    CHECK(cell(summary, by_key.at("hedged@4"), "mean") == "4");

    const auto reduction = read_table(dir.path / "out" / "reduction.csv");
    REQUIRE(reduction.rows.size() == 1);
    const auto& red = reduction.rows[0];
    CHECK(cell(reduction, red, "metric") == "assertiveness");
    CHECK(cell(reduction, red, "t_start") == "0");
    CHECK(cell(reduction, red, "t_end") == "4");
    CHECK(cell(reduction, red, "range_start") == "6");
    CHECK(cell(reduction, red, "range_end") == "6");
    CHECK(cell(reduction, red, "range_reduction_pct") == "0");
    CHECK(cell(reduction, red, "variance_reduction_pct") == "0");

    const auto anova = read_table(dir.path / "out" / "final_anova.csv");
    REQUIRE(anova.rows.size() == 1);
    CHECK(cell(anova, anova.rows[0], "t") == "4");
    CHECK(cell(anova, anova.rows[0], "f") == "inf");
    CHECK(cell(anova, anova.rows[0], "df_between") == "1");
    CHECK(cell(anova, anova.rows[0], "df_within") == "2");
    CHECK(cell(anova, anova.rows[0], "p") == "0");

    std::ostringstream report_log;
    REQUIRE(ex::cmd_report(config, report_log) == ex::kExitSuccess);
    CHECK(std::filesystem::exists(dir.path / "out" / "report" / "assertiveness.svg"));
    CHECK(std::filesystem::exists(dir.path / "out" / "report" / "word_count.svg"));
    const std::string summary_md = read_bytes(dir.path / "out" / "report" / "summary.md");
    CHECK(summary_md.find("# exp-judge") != std::string::npos);
    CHECK(summary_md.find("## reduction.csv") != std::string::npos);
    CHECK(summary_md.find("## final_anova.csv") != std::string::npos);
}

TEST_CASE("judge command explains refusals and surfaces hard backend failures") {
    testsupport::RuleJudgeBackend rule;

    SUBCASE("a study with no judged metrics is refused") {
        TempDir dir("jnometric");
        const auto config = ex::parse_config(R"({
            "study": "study1", "store": "store", "output": "out",
            "sources": [{"id": "a", "text": "x."}]
        })", dir.path);
        std::ostringstream log;
        CHECK(ex::cmd_judge(config, 1, log, &rule) == ex::kExitConfig);
        CHECK(log.str().find("no judged metrics") != std::string::npos);
    }

    SUBCASE("a missing judge backend is refused") {
        TempDir dir("jnoback");
        const auto config = ex::parse_config(R"({
            "study": "custom", "store": "store", "output": "out",
            "sources": [{"id": "a", "text": "x."}],
            "judge": {"metrics": ["assertiveness"], "timepoints": [0]}
        })", dir.path);
        std::ostringstream log;
        CHECK(ex::cmd_judge(config, 1, log, nullptr) == ex::kExitConfig);
        CHECK(log.str().find("no judge backend") != std::string::npos);
    }

    SUBCASE("an empty timepoint list is refused") {
        TempDir dir("jnotimes");
        const auto config = ex::parse_config(R"({
            "study": "custom", "store": "store", "output": "out",
            "sources": [{"id": "a", "text": "x."}],
            "judge": {"metrics": ["assertiveness"], "timepoints": []}
        })", dir.path);
        std::ostringstream log;
        CHECK(ex::cmd_judge(config, 1, log, &rule) == ex::kExitConfig);
        CHECK(log.str().find("no judge timepoints") != std::string::npos);
    }

    SUBCASE("a missing or empty store is refused") {
        TempDir dir("jnostore");
        const auto config = ex::parse_config(R"({
            "study": "custom", "store": "store", "output": "out",
            "sources": [{"id": "a", "text": "x."}],
            "judge": {"metrics": ["assertiveness"], "timepoints": [0]}
        })", dir.path);
        std::ostringstream log;
        CHECK(ex::cmd_judge(config, 1, log, &rule) == ex::kExitConfig);
        CHECK(log.str().find("no trajectory store") != std::string::npos);

        std::filesystem::create_directories(config.store_dir);
        std::ostringstream log2;
        CHECK(ex::cmd_judge(config, 1, log2, &rule) == ex::kExitConfig);
        CHECK(log2.str().find("nothing to judge") != std::string::npos);
    }

    SUBCASE("a backend that never answers maps to the backend exit code") {
        TempDir dir("jdead");
        const auto config = ex::parse_config(R"({
            "study": "custom", "experiment": "jdead",
            "chain": {"steps": 1, "recover": false},
            "runs": 1, "store": "store", "output": "out",
            "sources": [{"id": "a", "text": "Plain statement."}],
            "judge": {"metrics": ["assertiveness"], "timepoints": [0],
                      "retry": {"max_attempts": 1}}
        })", dir.path);
        std::ostringstream run_log;
        REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);

        testsupport::FlakyBackend dead(1000000);
        std::ostringstream log;
        CHECK(ex::cmd_judge(config, 1, log, &dead) == ex::kExitBackend);
        CHECK(log.str().find("backend failure during judging") != std::string::npos);
        const auto judged = read_table(dir.path / "out" / "judged.csv");
        CHECK(judged.header == csv::Row{"run", "t", "metric", "value"});
        CHECK(judged.rows.empty());
    }
}

TEST_CASE("judge command expands emotion profiles and analysis builds the transition suite") {
    TempDir dir("jemotion");
    const auto config = ex::parse_config(R"({
        "study": "study5b",
        "experiment": "exp-emotion",
        "chain": {"steps": 2, "recover": false},
        "runs": 2,
        "seed": 9,
        "store": "store",
        "output": "out",
        "sources": [
            {"id": "anger", "text": "I am livid and furious at this betrayal."},
            {"id": "joy", "text": "I am so happy today, the happiest, full of joy."}
        ]
    })", dir.path);
    CHECK(config.judge.metrics == std::vector<std::string>{"emotion"});
    CHECK(config.judge.timepoints == std::vector<int>{0, 2});

    std::ostringstream run_log;
    REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);
    testsupport::RuleJudgeBackend rule;
    std::ostringstream judge_log;
    REQUIRE(ex::cmd_judge(config, 3, judge_log, &rule) == ex::kExitSuccess);

    const auto judged = read_table(dir.path / "out" / "judged.csv");
    CHECK(judged.rows.size() == 8u * 7u);
    std::map<std::string, std::map<std::string, std::set<std::string>>> by_source_metric;
    for (const auto& row : judged.rows) {
        const std::string run_id = cell(judged, row, "run");
        by_source_metric[run_id.substr(0, run_id.find('/'))][cell(judged, row, "metric")].insert(
            cell(judged, row, "value"));
    }
    CHECK(by_source_metric.at("anger").at("emotion_primary") == std::set<std::string>{"Anger"});
    CHECK(by_source_metric.at("anger").at("emotion_anger") == std::set<std::string>{"3"});
    CHECK(by_source_metric.at("anger").at("emotion_joy") == std::set<std::string>{"0"});
    CHECK(by_source_metric.at("anger").at("valence") == std::set<std::string>{"1"});
    CHECK(by_source_metric.at("joy").at("emotion_primary") == std::set<std::string>{"Joy"});
    CHECK(by_source_metric.at("joy").at("valence") == std::set<std::string>{"7"});

    std::ostringstream analyze_log;
    REQUIRE(ex::cmd_analyze(config, analyze_log) == ex::kExitSuccess);

    const auto preservation = read_table(dir.path / "out" / "preservation.csv");
    REQUIRE(preservation.rows.size() == 4);
    for (const auto& row : preservation.rows) {
        CHECK(cell(preservation, row, "rate") == "1");
        CHECK(cell(preservation, row, "n_valid") == "2");
        CHECK(cell(preservation, row, "n_total") == "2");
    }

    const auto transitions = read_table(dir.path / "out" / "transitions.csv");
    CHECK(transitions.rows.size() == 25);
    std::map<std::string, std::map<std::string, csv::Row>> matrix;
    for (const auto& row : transitions.rows) {
        matrix[cell(transitions, row, "from")][cell(transitions, row, "to")] = row;
    }
    CHECK(cell(transitions, matrix.at("Anger").at("Anger"), "probability") == "1");
    CHECK(cell(transitions, matrix.at("Anger").at("Joy"), "probability") == "0");
    CHECK(cell(transitions, matrix.at("Anger").at("Anger"), "row_count") == "2");
    CHECK(cell(transitions, matrix.at("Joy").at("Joy"), "probability") == "1");
    CHECK(cell(transitions, matrix.at("Anxiety").at("Anxiety"), "probability").empty());
    CHECK(cell(transitions, matrix.at("Anxiety").at("Anxiety"), "row_valid") == "0");
    CHECK(cell(transitions, matrix.at("Anxiety").at("Anxiety"), "row_count") == "0");

    const auto drift = read_table(dir.path / "out" / "valence_drift.csv");
    REQUIRE(drift.rows.size() == 2);
    for (const auto& row : drift.rows) {
        CHECK(cell(drift, row, "metric") == "valence");
        CHECK(cell(drift, row, "drift") == "0");
        CHECK(cell(drift, row, "t_stat") == "0");
        CHECK(cell(drift, row, "p") == "1");
        CHECK(cell(drift, row, "degenerate") == "0");
    }

    std::ostringstream report_log;
    REQUIRE(ex::cmd_report(config, report_log) == ex::kExitSuccess);
    CHECK(std::filesystem::exists(dir.path / "out" / "report" / "transitions.svg"));
    CHECK(std::filesystem::exists(dir.path / "out" / "report" / "preservation.svg"));
}

TEST_CASE("report command needs an analysis directory first") {
    TempDir dir("repnone");
    const auto config = ex::parse_config(R"({
        "study": "custom", "store": "store", "output": "out",
        "sources": [{"id": "a", "text": "x."}]
    })", dir.path);
    std::ostringstream log;
    CHECK(ex::cmd_report(config, log) == ex::kExitConfig);
    CHECK(log.str().find("no analysis directory") != std::string::npos);
}

TEST_CASE("report command renders study charts from the analysis tables") {
    TempDir dir("repstudy1");
    const auto config = ex::parse_config(R"({
        "study": "study1",
        "experiment": "rep-surv",
        "chain": {"steps": 2},
        "runs": 2,
        "store": "store",
        "output": "out"
    })", dir.path);
    std::ostringstream run_log, analyze_log, report_log;
    REQUIRE(ex::cmd_run(config, {}, run_log) == ex::kExitSuccess);
    REQUIRE(ex::cmd_analyze(config, analyze_log) == ex::kExitSuccess);
    REQUIRE(ex::cmd_report(config, report_log) == ex::kExitSuccess);

    const auto report_dir = dir.path / "out" / "report";
    for (const char* name : {"word_count.svg", "similarity.svg", "survival_curve.svg"}) {
        CHECK(std::filesystem::exists(report_dir / name));
    }
    const std::string svg = read_bytes(report_dir / "survival_curve.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    const std::string summary_md = read_bytes(report_dir / "summary.md");
    CHECK(summary_md.find("## half_life.csv") != std::string::npos);

    std::ostringstream again;
    CHECK(ex::cmd_report(config, again) == ex::kExitSuccess);
}

TEST_CASE("frame validation writes a consensus report and maps failures to exit codes") {
    TempDir dir("frames");
    const auto config = ex::parse_config(R"({
        "study": "custom",
        "experiment": "frame-check",
        "store": "store",
        "output": "out",
        "sources": [{"id": "x", "text": "placeholder"}]
    })", dir.path);

    const auto specs = fixtures::load_frames("housing");
    std::vector<judge::FrameCandidate> candidates;
    for (const auto& spec : specs) candidates.push_back({spec.id, spec.name, spec.text});
    testsupport::PreferenceFrameBackend pref(candidates, {"A", "C", "B", "D"});

    std::ostringstream log;
    REQUIRE(ex::cmd_validate_frames(config, "housing", 4, 7, log, &pref) == ex::kExitSuccess);
    CHECK(log.str().find("4/4 valid runs") != std::string::npos);
    CHECK(log.str().find("Housing Affordability > Neighborhood Character") != std::string::npos);
    CHECK(log.str().find("distinctiveness pass") != std::string::npos);

    const auto path = dir.path / "out" / "frame_validation_housing.json";
    const auto doc = nlohmann::json::parse(read_bytes(path));
    CHECK(doc["issue"] == "housing");
    CHECK(doc["runs_requested"] == 4);
    CHECK(doc["runs_valid"] == 4);
    CHECK(doc["reliable"] == true);
    CHECK(doc["consensus_order"] == nlohmann::json::array({"A", "C", "B", "D"}));
    CHECK(doc["borda_points"]["A"] == 12);
    CHECK(doc["borda_points"]["C"] == 8);
    CHECK(doc["borda_points"]["B"] == 4);
    CHECK(doc["borda_points"]["D"] == 0);
    CHECK(doc["mean_scores"]["A"]["clarity"].get<double>() == doctest::Approx(7.0));
    CHECK(doc["mean_scores"]["C"]["argument_quality"].get<double>() == doctest::Approx(6.0));
    CHECK(doc["mean_scores"]["D"]["persuasiveness"].get<double>() == doctest::Approx(4.0));
    CHECK(doc["distinctiveness_pass"] == true);
    for (const auto& [pair, rate] : doc["pair_distinct_rate"].items()) {
        CHECK(rate.get<double>() == doctest::Approx(1.0));
    }

    std::ostringstream bad_issue;
    CHECK(ex::cmd_validate_frames(config, "zoning", 3, 1, bad_issue, &pref) == ex::kExitConfig);

    std::ostringstream unconfigured;
    CHECK(ex::cmd_validate_frames(config, "housing", 3, 1, unconfigured, nullptr) ==
          ex::kExitConfig);
    CHECK(unconfigured.str().find("no judge backend") != std::string::npos);

    testsupport::FlakyBackend dead(1000000);
    std::ostringstream transport;
    CHECK(ex::cmd_validate_frames(config, "housing", 3, 1, transport, &dead) == ex::kExitBackend);
    CHECK(transport.str().find("backend failure") != std::string::npos);
}

#ifdef RELAYLAB_CLI_PATH

namespace {

int run_cli(const std::string& args) {
    const std::string command = std::string(RELAYLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST_CASE("command line binary drives the offline workflow end to end") {
    TempDir dir("cli");
    const auto config_path = dir.path / "config.json";
    {
        std::ofstream cfg(config_path, std::ios::binary);
        cfg << R"({
            "study": "custom",
            "experiment": "cli-smoke",
            "chain": {"steps": 2},
            "runs": 2,
            "store": "store",
            "output": "out",
            "sources": [{"id": "alpha", "text": "One thing. Another thing."}]
        })";
    }

    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("run") == 2);
    CHECK(run_cli("transmogrify -c " + config_path.string()) == 2);
    CHECK(run_cli("run -c " + (dir.path / "missing.json").string()) == 2);

    CHECK(run_cli("run -c " + config_path.string()) == 0);
    CHECK(std::filesystem::exists(dir.path / "store" / "alpha" / "run_0002.ndjson"));
    CHECK(run_cli("analyze -c " + config_path.string()) == 0);
    CHECK(std::filesystem::exists(dir.path / "out" / "word_count.csv"));
    CHECK(run_cli("report -c " + config_path.string()) == 0);
    CHECK(std::filesystem::exists(dir.path / "out" / "report" / "summary.md"));

    CHECK(run_cli("judge -c " + config_path.string()) == 2);
    CHECK(run_cli("validate-frames -c " + config_path.string()) == 2);
}

#endif
