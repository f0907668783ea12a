#include <doctest.h>

#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "relaylab/backend.hpp"
#include "relaylab/chain.hpp"
#include "support/backends.hpp"

using namespace relaylab;
using namespace relaylab::chain;

namespace {

/// Echoes payloads while sharing one request log across with_seed clones.
class SharedRecordingBackend final : public Backend {
   public:
    SharedRecordingBackend() : store_(std::make_shared<Store>()) {}

    std::string complete(const PromptRequest& request) override {
        log_.calls++;
        log_.attempts++;
        std::lock_guard<std::mutex> lock(store_->mutex);
        store_->requests.push_back(request);
        return request.payload_text;
    }
    std::string id() const override { return "recording"; }
    std::unique_ptr<Backend> with_seed(std::uint64_t) const override {
        return std::unique_ptr<Backend>(new SharedRecordingBackend(store_));
    }
    std::vector<PromptRequest> requests() const {
        std::lock_guard<std::mutex> lock(store_->mutex);
        return store_->requests;
    }

   private:
    struct Store {
        std::mutex mutex;
        std::vector<PromptRequest> requests;
    };
    explicit SharedRecordingBackend(std::shared_ptr<Store> store) : store_(std::move(store)) {}
    std::shared_ptr<Store> store_;
};

DegraderConfig light_degrader(std::uint64_t seed) {
    DegraderConfig config;
    config.default_drop_probability = 0.3;
    config.seed = seed;
    return config;
}

}  // namespace

TEST_CASE("signal roles round-trip") {
    for (auto role : {SignalRole::source, SignalRole::transmitted, SignalRole::recovered}) {
        CHECK(signal_role_from_string(to_string(role)) == role);
    }
    CHECK_THROWS_AS(signal_role_from_string("observer"), std::invalid_argument);
}

TEST_CASE("per-run seeds fold the run index into the base seed") {
    CHECK(run_seed(0, 1) == 1);
    CHECK(run_seed(0xff00, 3) == 0xff03);
    std::set<std::uint64_t> seeds;
    for (int run = 1; run <= 100; ++run) seeds.insert(run_seed(20260816, run));
    CHECK(seeds.size() == 100);
}

TEST_CASE("a chain is source, n transmissions, then recovery") {
    EchoBackend backend;
    ChainConfig config;
    config.n_steps = 5;

    std::vector<Signal> observed;
    Trajectory t = run_chain("the message", config, backend, 42,
                             [&](const Signal& s) { observed.push_back(s); });

    REQUIRE(t.signals.size() == 7);
    CHECK(t.seed == 42);
    CHECK(t.backend_id == "echo");
    CHECK(t.signals.front().role == SignalRole::source);
    CHECK(t.signals.front().step == 0);
    for (int step = 1; step <= 5; ++step) {
        REQUIRE(t.at_step(step) != nullptr);
        CHECK(t.at_step(step)->role == SignalRole::transmitted);
        CHECK(t.at_step(step)->text == "the message");
    }
    CHECK(t.at_step(6)->role == SignalRole::recovered);
    CHECK(t.has_recovery(5));
    CHECK(t.complete(config));
    CHECK(t.last_step() == 5);

    REQUIRE(observed.size() == 7);
    for (std::size_t i = 0; i < observed.size(); ++i) {
        CHECK(observed[i].step == static_cast<int>(i));
        CHECK(observed[i].text == t.signals[i].text);
    }
}

TEST_CASE("each call carries the configured instruction and prior text") {
    SharedRecordingBackend backend;
    ChainConfig config;
    config.n_steps = 3;
    config.temperature = 0.7;
    config.max_output_tokens = 512;

    run_chain("source text", config, backend, 1);

    const auto requests = backend.requests();
    REQUIRE(requests.size() == 4);
    for (int i = 0; i < 3; ++i) {
        CHECK(requests[i].instruction_text == default_transmit_instruction());
        CHECK(requests[i].payload_text == "source text");
        CHECK(requests[i].temperature == doctest::Approx(0.7));
        REQUIRE(requests[i].max_output_tokens.has_value());
        CHECK(*requests[i].max_output_tokens == 512);
    }
    CHECK(requests[3].instruction_text == default_recover_instruction());
    CHECK(requests[3].payload_text == "source text");
}

TEST_CASE("default instructions are fixed strings") {
    CHECK(default_transmit_instruction() ==
          "You've received this information from an AI agent. Share the important parts of "
          "this information with the next AI agent. Just write your message.");
    CHECK(default_recover_instruction() ==
          "You've received this information from an AI agent. Share it to a human reader, "
          "in one version. Just write your message.");
}

TEST_CASE("blank output aborts the run but keeps prior steps") {
    testsupport::ScriptedBackend backend({"fine output", "   \n\t"});
    ChainConfig config;
    config.n_steps = 4;

    Trajectory t;
    t.seed = 9;
    t.signals.push_back({0, SignalRole::source, "start"});
    CHECK_THROWS_AS(continue_chain(t, config, backend), EmptyOutputError);
    CHECK(t.last_step() == 1);
    CHECK(t.at_step(1)->text == "fine output");
    CHECK_FALSE(t.complete(config));
}

TEST_CASE("a degrader that deletes everything is a blank-output failure") {
    DegraderConfig config;
    config.default_drop_probability = 1.0;
    DegraderBackend backend(config);
    ChainConfig chain_config;
    chain_config.n_steps = 2;
    CHECK_THROWS_AS(run_chain("One. Two.", chain_config, backend, 5), EmptyOutputError);
}

TEST_CASE("trajectory step accounting tolerates gaps") {
    Trajectory t;
    t.signals.push_back({0, SignalRole::source, "s"});
    t.signals.push_back({1, SignalRole::transmitted, "a"});
    t.signals.push_back({3, SignalRole::transmitted, "c"});
    CHECK(t.last_step() == 1);
    CHECK(t.at_step(2) == nullptr);
    ChainConfig config;
    config.n_steps = 3;
    CHECK_FALSE(t.complete(config));
}

TEST_CASE("continue_chain requires a source signal") {
    EchoBackend backend;
    ChainConfig config;
    Trajectory empty;
    CHECK_THROWS_AS(continue_chain(empty, config, backend), std::invalid_argument);
}

TEST_CASE("continuation after interruption is bitwise-identical") {
    ChainConfig config;
    config.n_steps = 8;
    DegraderBackend backend(light_degrader(0));
    const std::string source =
        "Alpha report. Beta report. Gamma report. Delta report. Epsilon report. "
        "Zeta report. Eta report. Theta report.";

    Trajectory full = run_chain(source, config, backend, 77);

    for (int cut : {1, 3, 6}) {
        Trajectory partial;
        partial.seed = 77;
        partial.backend_id = full.backend_id;
        for (const auto& signal : full.signals) {
            if (signal.step <= cut && signal.role != SignalRole::recovered) {
                partial.signals.push_back(signal);
            }
        }
        continue_chain(partial, config, backend);
        REQUIRE(partial.signals.size() == full.signals.size());
        for (std::size_t i = 0; i < full.signals.size(); ++i) {
            CHECK(partial.signals[i].step == full.signals[i].step);
            CHECK(partial.signals[i].text == full.signals[i].text);
        }
    }
}

TEST_CASE("recovery demands a complete transmission chain") {
    EchoBackend backend;
    ChainConfig config;
    config.n_steps = 3;
    config.recover = false;

    Trajectory t = run_chain("payload", config, backend, 2);
    CHECK(t.signals.size() == 4);
    CHECK(t.complete(config));
    CHECK_FALSE(t.has_recovery(3));

    ChainConfig with_recovery = config;
    with_recovery.recover = true;
    CHECK_FALSE(t.complete(with_recovery));

    const Signal appended = run_recovery(t, with_recovery, backend);
    CHECK(appended.step == 4);
    CHECK(appended.role == SignalRole::recovered);
    CHECK(t.complete(with_recovery));

    Trajectory stub;
    stub.signals.push_back({0, SignalRole::source, "s"});
    CHECK_THROWS_AS(run_recovery(stub, with_recovery, backend), std::invalid_argument);
}

TEST_CASE("replicate produces ordered, independently seeded runs") {
    EchoBackend backend;
    ChainConfig config;
    config.n_steps = 2;

    const RunSet set = replicate("text", config, backend, 500, 8, 4);
    CHECK(set.failures.empty());
    REQUIRE(set.runs.size() == 8);
    for (int run = 1; run <= 8; ++run) {
        const auto& t = set.runs[static_cast<std::size_t>(run - 1)];
        CHECK(t.run_id == "run_" + std::to_string(run));
        CHECK(t.seed == run_seed(500, run));
        CHECK(t.complete(config));
    }
    CHECK_THROWS_AS(replicate("text", config, backend, 1, 0), std::invalid_argument);
}

TEST_CASE("one failing run never aborts its siblings") {
    testsupport::FlakyBackend backend(2);
    ChainConfig config;
    config.n_steps = 2;

    const RunSet set = replicate("text", config, backend, 0, 5, 1);
    REQUIRE(set.failures.size() == 2);
    CHECK(set.failures[0].first == "run_1");
    CHECK(set.failures[1].first == "run_2");
    REQUIRE(set.runs.size() == 3);
    CHECK(set.runs[0].run_id == "run_3");
}

TEST_CASE("parallel and serial replication agree under a seeded backend") {
    DegraderBackend backend(light_degrader(0));
    ChainConfig config;
    config.n_steps = 4;
    const std::string source =
        "One thing happened. Another thing happened. A third thing happened. "
        "A fourth thing happened. A fifth thing happened.";

    const RunSet serial = replicate(source, config, backend, 31, 6, 1);
    const RunSet parallel = replicate(source, config, backend, 31, 6, 4);

    auto failed_ids = [](const RunSet& set) {
        std::set<std::string> ids;
        for (const auto& [id, what] : set.failures) ids.insert(id);
        return ids;
    };
    CHECK(failed_ids(serial) == failed_ids(parallel));

    REQUIRE(serial.runs.size() == parallel.runs.size());
    REQUIRE(!serial.runs.empty());
    for (std::size_t i = 0; i < serial.runs.size(); ++i) {
        CHECK(serial.runs[i].run_id == parallel.runs[i].run_id);
        REQUIRE(serial.runs[i].signals.size() == parallel.runs[i].signals.size());
        for (std::size_t j = 0; j < serial.runs[i].signals.size(); ++j) {
            CHECK(serial.runs[i].signals[j].text == parallel.runs[i].signals[j].text);
        }
    }
}
