#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relaylab/chain.hpp"

namespace relaylab::chain {

/// One directory per experiment; inside it, one subdirectory per source and
/// one newline-delimited record file per run. Each line is a JSON object with
/// keys role, step, text, so arbitrary signal text survives round-trips.
class TrajectoryStore {
   public:
    explicit TrajectoryStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path manifest_path() const { return root_ / "manifest.json"; }
    std::filesystem::path source_dir(const std::string& source_id) const;
    std::filesystem::path run_file(const std::string& source_id, int run_index) const;
    static std::string run_name(int run_index);

    void append_signal(const std::filesystem::path& run_file, const Signal& signal) const;

    /// Loads a run file. A trailing line interrupted mid-write is dropped;
    /// any other malformed content throws.
    std::vector<Signal> load_signals(const std::filesystem::path& run_file) const;

    Trajectory load_run(const std::string& source_id, int run_index,
                        std::uint64_t base_seed) const;

    std::vector<int> existing_runs(const std::string& source_id) const;

   private:
    std::filesystem::path root_;
};

/// What an experiment intends to execute. The digest of the plan guards
/// resumption: a store written under a different plan is never extended.
struct ExperimentPlan {
    std::string experiment_id;
    std::vector<std::pair<std::string, std::string>> sources;  ///< (id, text)
    ChainConfig chain;
    int n_runs = 100;
    std::uint64_t base_seed = 0;
};

std::uint64_t plan_digest(const ExperimentPlan& plan, const std::string& backend_id);

struct RunManifest {
    std::string experiment_id;
    std::string backend_id;
    std::uint64_t config_digest = 0;
    std::uint64_t base_seed = 0;
    int n_runs = 0;
    int n_steps = 0;
    bool recover = true;
    std::vector<std::pair<std::string, std::uint64_t>> source_digests;
    std::string started_at;
    std::string finished_at;
    /// "<source_id>/run_N" -> complete | partial | failed
    std::map<std::string, std::string> run_status;

    void save(const std::filesystem::path& path) const;
    static std::optional<RunManifest> load(const std::filesystem::path& path);
};

/// The store was written under a different plan digest.
struct PlanMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The store holds unfinished work but resumption was not requested.
struct ResumeRequiredError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExecutionOptions {
    int workers = 1;
    bool resume = false;
    /// Stop after launching this many incomplete runs (0 = no limit). Lets
    /// batch operation spread an experiment over several invocations.
    int max_runs_this_invocation = 0;
};

struct ExecutionReport {
    int completed = 0;
    int failed = 0;
    int skipped_existing = 0;
    int not_attempted = 0;
    std::vector<std::pair<std::string, std::string>> errors;

    bool fully_complete() const { return failed == 0 && not_attempted == 0; }
};

/// Executes a plan against a store. Completed runs are never re-executed;
/// partial runs continue from their last persisted step. Refuses to touch a
/// store whose manifest digest does not match the plan, and refuses to extend
/// a partially-complete store unless options.resume is set.
ExecutionReport execute_plan(const ExperimentPlan& plan, Backend& backend,
                             TrajectoryStore& store, const ExecutionOptions& options = {});

}  // namespace relaylab::chain
