#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relaylab/experiment.hpp"

namespace ex = relaylab::experiment;

int main(int argc, char** argv) {
    CLI::App app{"Iterated model-to-model transmission laboratory"};
    app.set_version_flag("--version", "relaylab 0.1.0");
    app.require_subcommand(1);

    std::string config_path;
    int workers = 1;
    std::optional<std::uint64_t> seed_override;
    std::optional<double> rate_limit_override;
    bool resume = false;
    int max_runs = 0;
    std::string issue;
    int validation_runs = 5;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "Experiment config JSON file")->required();
        cmd->add_option("-w,--workers", workers, "Parallel workers")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed_override, "Override the config's base seed");
        cmd->add_option("--rate-limit", rate_limit_override,
                        "Maximum backend requests per second (0 disables)");
    };

    CLI::App* run = app.add_subcommand("run", "Execute transmission chains into the store");
    add_common(run);
    run->add_flag("--resume", resume, "Continue a partially complete store");
    run->add_option("--max-runs", max_runs,
                    "Launch at most this many incomplete runs this invocation (0 = all)");

    CLI::App* analyze = app.add_subcommand("analyze", "Compute metrics from the store into CSVs");
    add_common(analyze);

    CLI::App* judge = app.add_subcommand("judge", "Score stored texts with the judge model");
    add_common(judge);

    CLI::App* report = app.add_subcommand("report", "Render SVG charts and a summary from CSVs");
    add_common(report);

    CLI::App* validate =
        app.add_subcommand("validate-frames", "Run the frame validation protocol for one issue");
    add_common(validate);
    validate->add_option("--issue", issue, "Frame set to validate (housing or speech)")
        ->required();
    validate->add_option("--runs", validation_runs, "Validation repetitions")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ex::kExitSuccess : ex::kExitConfig;
    }

    try {
        ex::ExperimentConfig config = ex::load_config(config_path);
        if (seed_override) config.base_seed = *seed_override;
        if (rate_limit_override) config.rate_limit = *rate_limit_override;

        if (run->parsed()) {
            relaylab::chain::ExecutionOptions options;
            options.workers = workers;
            options.resume = resume;
            options.max_runs_this_invocation = max_runs;
            return ex::cmd_run(config, options, std::cout);
        }
        if (analyze->parsed()) return ex::cmd_analyze(config, std::cout);
        if (judge->parsed()) return ex::cmd_judge(config, workers, std::cout);
        if (report->parsed()) return ex::cmd_report(config, std::cout);
        if (validate->parsed()) {
            const std::uint64_t seed = seed_override ? *seed_override : config.base_seed;
            return ex::cmd_validate_frames(config, issue, validation_runs, seed, std::cout);
        }
    } catch (const ex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ex::kExitConfig;
    } catch (const relaylab::TransportError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return ex::kExitBackend;
    } catch (const relaylab::ProtocolError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return ex::kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return ex::kExitSuccess;
}
