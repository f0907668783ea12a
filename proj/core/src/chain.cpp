#include "relaylab/chain.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <thread>

namespace relaylab::chain {

namespace {

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string to_string(SignalRole role) {
    switch (role) {
        case SignalRole::source: return "source";
        case SignalRole::transmitted: return "transmitted";
        case SignalRole::recovered: return "recovered";
    }
    throw std::logic_error("unknown signal role");
}

SignalRole signal_role_from_string(const std::string& s) {
    if (s == "source") return SignalRole::source;
    if (s == "transmitted") return SignalRole::transmitted;
    if (s == "recovered") return SignalRole::recovered;
    throw std::invalid_argument("unknown signal role: " + s);
}

const std::string& default_transmit_instruction() {
    static const std::string text =
        "You've received this information from an AI agent. Share the important parts of "
        "this information with the next AI agent. Just write your message.";
    return text;
}

const std::string& default_recover_instruction() {
    static const std::string text =
        "You've received this information from an AI agent. Share it to a human reader, "
        "in one version. Just write your message.";
    return text;
}

const Signal* Trajectory::at_step(int step) const {
    for (const auto& s : signals) {
        if (s.step == step) return &s;
    }
    return nullptr;
}

int Trajectory::last_step() const {
    int last = -1;
    for (int step = 0;; ++step) {
        const Signal* s = at_step(step);
        if (s == nullptr || s->role == SignalRole::recovered) break;
        last = step;
    }
    return last;
}

bool Trajectory::has_recovery(int n_steps) const {
    const Signal* s = at_step(n_steps + 1);
    return s != nullptr && s->role == SignalRole::recovered;
}

bool Trajectory::complete(const ChainConfig& config) const {
    if (last_step() < config.n_steps) return false;
    return !config.recover || has_recovery(config.n_steps);
}

std::uint64_t run_seed(std::uint64_t base_seed, int run_index) {
    return base_seed ^ static_cast<std::uint64_t>(run_index);
}

Trajectory run_chain(const std::string& source, const ChainConfig& config, Backend& backend,
                     std::uint64_t seed, const SignalObserver& observer) {
    Trajectory t;
    t.seed = seed;
    t.backend_id = backend.id();
    t.signals.push_back({0, SignalRole::source, source});
    if (observer) observer(t.signals.back());
    continue_chain(t, config, backend, observer);
    return t;
}

void continue_chain(Trajectory& trajectory, const ChainConfig& config, Backend& backend,
                    const SignalObserver& observer) {
    if (trajectory.signals.empty() || trajectory.at_step(0) == nullptr) {
        throw std::invalid_argument("trajectory has no source signal");
    }
    auto seeded = backend.with_seed(trajectory.seed);
    for (int step = trajectory.last_step(); step < config.n_steps; ++step) {
        PromptRequest request;
        request.instruction_text = config.transmit_instruction;
        request.payload_text = trajectory.at_step(step)->text;
        request.temperature = config.temperature;
        request.max_output_tokens = config.max_output_tokens;
        std::string out = seeded->complete(request);
        if (is_blank(out)) {
            throw EmptyOutputError("empty model output at step " + std::to_string(step + 1));
        }
        trajectory.signals.push_back({step + 1, SignalRole::transmitted, std::move(out)});
        if (observer) observer(trajectory.signals.back());
    }
    if (config.recover && !trajectory.has_recovery(config.n_steps)) {
        run_recovery(trajectory, config, backend, observer);
    }
}

Signal run_recovery(Trajectory& trajectory, const ChainConfig& config, Backend& backend,
                    const SignalObserver& observer) {
    const Signal* last = trajectory.at_step(config.n_steps);
    if (last == nullptr || trajectory.last_step() < config.n_steps) {
        throw std::invalid_argument("recovery requires a chain complete through step " +
                                    std::to_string(config.n_steps));
    }
    auto seeded = backend.with_seed(trajectory.seed);
    PromptRequest request;
    request.instruction_text = config.recover_instruction;
    request.payload_text = last->text;
    request.temperature = config.temperature;
    request.max_output_tokens = config.max_output_tokens;
    std::string out = seeded->complete(request);
    if (is_blank(out)) {
        throw EmptyOutputError("empty model output at recovery step");
    }
    trajectory.signals.push_back({config.n_steps + 1, SignalRole::recovered, std::move(out)});
    if (observer) observer(trajectory.signals.back());
    return trajectory.signals.back();
}

RunSet replicate(const std::string& source, const ChainConfig& config, Backend& backend,
                 std::uint64_t base_seed, int n_runs, int workers) {
    if (n_runs < 1) throw std::invalid_argument("replicate needs n_runs >= 1");
    workers = std::max(1, std::min(workers, n_runs));

    std::vector<std::optional<Trajectory>> slots(static_cast<std::size_t>(n_runs));
    std::vector<std::pair<std::string, std::string>> failures;
    std::mutex failures_mutex;
    std::atomic<int> next{1};

    auto worker = [&]() {
        for (int run = next.fetch_add(1); run <= n_runs; run = next.fetch_add(1)) {
            const std::string run_id = "run_" + std::to_string(run);
            try {
                Trajectory t =
                    run_chain(source, config, backend, run_seed(base_seed, run));
                t.run_id = run_id;
                slots[static_cast<std::size_t>(run - 1)] = std::move(t);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failures_mutex);
                failures.emplace_back(run_id, e.what());
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    RunSet out;
    for (auto& slot : slots) {
        if (slot.has_value()) out.runs.push_back(std::move(*slot));
    }
    out.failures = std::move(failures);
    return out;
}

}  // namespace relaylab::chain
