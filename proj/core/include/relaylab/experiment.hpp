#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relaylab/backend.hpp"
#include "relaylab/chain.hpp"
#include "relaylab/trajectory_store.hpp"

namespace relaylab::experiment {

/// Configuration problems: bad JSON, unknown study, missing fixture, invalid
/// field values. Mapped to exit code 2 by the command layer.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SourceText {
    std::string id;
    std::string text;
};

struct JudgeSettings {
    bool configured = false;
    BackendDescriptor backend;
    double temperature = 0.1;
    RetryPolicy retry;
    std::vector<int> timepoints;       ///< empty -> study default
    std::vector<std::string> metrics;  ///< empty -> study default
};

struct ExperimentConfig {
    std::string experiment_id;
    std::string study = "custom";
    BackendDescriptor backend;
    chain::ChainConfig chain;
    int n_runs = 100;
    std::uint64_t base_seed = 0;
    double rate_limit = 0.0;  ///< requests/second; 0 disables
    std::filesystem::path store_dir;
    std::filesystem::path output_dir;
    std::filesystem::path cache_dir;  ///< empty -> no response cache
    std::vector<SourceText> sources;
    JudgeSettings judge;
};

extern const std::vector<std::string> kStudyIds;

/// Parses a config file, applies study defaults (sources, judge metrics,
/// judge timepoints), and validates. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Same, from already-parsed JSON text.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});

/// The bundled sources for a study id (empty for "custom").
std::vector<SourceText> study_sources(const std::string& study);

/// The judge metrics a study uses (assertiveness, framework, advocacy,
/// intensity, valence, emotion).
std::vector<std::string> default_judge_metrics(const std::string& study);

std::vector<int> default_judge_timepoints(const std::string& study, int n_steps, bool recover);

chain::ExperimentPlan make_plan(const ExperimentConfig& config);

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitPartial = 4;

/// Executes the plan against the trajectory store. `backend_override` (used
/// by tests and the live smoke path) substitutes the constructed backend.
/// Returns a process exit code.
int cmd_run(const ExperimentConfig& config, const chain::ExecutionOptions& options,
            std::ostream& log, Backend* backend_override = nullptr);

/// Computes every lexical metric family that applies to the experiment's
/// study and writes CSV reports into the output directory.
int cmd_analyze(const ExperimentConfig& config, std::ostream& log);

/// Scores stored texts with the configured judge at the study's timepoints
/// and writes judged.csv (run, t, metric, value; missing values are empty).
int cmd_judge(const ExperimentConfig& config, int workers, std::ostream& log,
              Backend* judge_override = nullptr);

/// Renders SVG charts and a summary from the analysis CSVs.
int cmd_report(const ExperimentConfig& config, std::ostream& log);

/// Runs the frame validation protocol for one issue ("housing" or "speech")
/// and writes frame_validation_<issue>.json.
int cmd_validate_frames(const ExperimentConfig& config, const std::string& issue, int n_runs,
                        std::uint64_t seed, std::ostream& log, Backend* judge_override = nullptr);

}  // namespace relaylab::experiment
