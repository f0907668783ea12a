#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relaylab/backend.hpp"

namespace relaylab::chain {

enum class SignalRole { source, transmitted, recovered };

std::string to_string(SignalRole role);
SignalRole signal_role_from_string(const std::string& s);

struct Signal {
    int step = 0;
    SignalRole role = SignalRole::source;
    std::string text;
};

/// Instruction texts used verbatim for every transmission and recovery call.
const std::string& default_transmit_instruction();
const std::string& default_recover_instruction();

struct ChainConfig {
    int n_steps = 100;
    bool recover = true;
    std::string transmit_instruction = default_transmit_instruction();
    std::string recover_instruction = default_recover_instruction();
    double temperature = 1.0;
    std::optional<int> max_output_tokens;
};

/// One run: the source signal at step 0, transmitted signals 1..n, and, when
/// recovery is configured, a recovered signal at step n+1.
struct Trajectory {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string backend_id;
    std::vector<Signal> signals;

    const Signal* at_step(int step) const;
    /// Highest contiguous step present starting from 0, ignoring recovery.
    int last_step() const;
    bool has_recovery(int n_steps) const;
    bool complete(const ChainConfig& config) const;
};

using SignalObserver = std::function<void(const Signal&)>;

/// Derives the per-run seed from the experiment base seed and 1-based run
/// index.
std::uint64_t run_seed(std::uint64_t base_seed, int run_index);

/// Runs a fresh chain of config.n_steps transmissions (plus recovery when
/// configured). The observer fires once per produced signal, source included,
/// so callers can persist progress. Blank model output at any step is a hard
/// failure for the run (EmptyOutputError); the trajectory keeps the steps
/// produced before the failure.
Trajectory run_chain(const std::string& source, const ChainConfig& config, Backend& backend,
                     std::uint64_t seed, const SignalObserver& observer = {});

/// Extends a partial trajectory in place to completion. Steps already present
/// are never re-executed; under a seeded backend the continuation is
/// bitwise-identical to an uninterrupted run.
void continue_chain(Trajectory& trajectory, const ChainConfig& config, Backend& backend,
                    const SignalObserver& observer = {});

/// Appends the recovery signal (step n+1). Requires a trajectory that is
/// complete through n_steps.
Signal run_recovery(Trajectory& trajectory, const ChainConfig& config, Backend& backend,
                    const SignalObserver& observer = {});

struct RunSet {
    std::vector<Trajectory> runs;
    /// run_id -> error for runs that failed; failures never abort siblings.
    std::vector<std::pair<std::string, std::string>> failures;
};

/// M independent replications with per-run seeds derived from base_seed.
/// Distinct runs may execute in parallel up to `workers`.
RunSet replicate(const std::string& source, const ChainConfig& config, Backend& backend,
                 std::uint64_t base_seed, int n_runs, int workers = 1);

}  // namespace relaylab::chain
