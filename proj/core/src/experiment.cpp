#include "relaylab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "relaylab/csv.hpp"
#include "relaylab/fixtures.hpp"
#include "relaylab/frame_fidelity.hpp"
#include "relaylab/judge.hpp"
#include "relaylab/lexical_metrics.hpp"
#include "relaylab/rate_limiter.hpp"
#include "relaylab/response_cache.hpp"
#include "relaylab/stats.hpp"
#include "relaylab/survival.hpp"
#include "relaylab/svg_report.hpp"
#include "relaylab/text_match.hpp"

using json = nlohmann::json;

namespace relaylab::experiment {

const std::vector<std::string> kStudyIds = {
    "study1",          "study2",           "study3",
    "study4-competitive", "study4-solo",   "study5a-solo",
    "study5a-competitive", "study5b",      "custom"};

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

double require_number(const json& node, const std::string& where) {
    if (!node.is_number()) throw ConfigError(where + " must be a number");
    return node.get<double>();
}

int require_int(const json& node, const std::string& where) {
    if (!node.is_number_integer()) throw ConfigError(where + " must be an integer");
    return node.get<int>();
}

std::string require_string(const json& node, const std::string& where) {
    if (!node.is_string()) throw ConfigError(where + " must be a string");
    return node.get<std::string>();
}

RetryPolicy parse_retry(const json& node) {
    RetryPolicy retry;
    if (node.contains("max_attempts")) {
        retry.max_attempts = require_int(node["max_attempts"], "retry.max_attempts");
        if (retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    }
    if (node.contains("base_delay_ms")) {
        retry.base_delay =
            std::chrono::milliseconds(require_int(node["base_delay_ms"], "retry.base_delay_ms"));
    }
    return retry;
}

BackendDescriptor parse_backend(const json& node, const std::string& where) {
    if (!node.is_object()) throw ConfigError(where + " must be an object");
    if (!node.contains("kind")) throw ConfigError(where + " needs a \"kind\"");
    BackendDescriptor d;
    try {
        d.kind = backend_kind_from_string(require_string(node["kind"], where + ".kind"));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (node.contains("endpoint")) d.endpoint = require_string(node["endpoint"], where + ".endpoint");
    if (node.contains("model")) d.model_id = require_string(node["model"], where + ".model");
    if (node.contains("temperature")) {
        d.default_temperature = require_number(node["temperature"], where + ".temperature");
    }
    if (node.contains("api_key_env")) {
        d.api_key_env = require_string(node["api_key_env"], where + ".api_key_env");
    }
    if (node.contains("retry")) d.retry = parse_retry(node["retry"]);
    if (d.kind == BackendKind::http_chat && d.endpoint.empty()) {
        throw ConfigError(where + ": http-chat backend needs an \"endpoint\"");
    }
    if (node.contains("degrader")) {
        const json& g = node["degrader"];
        if (!g.is_object()) throw ConfigError(where + ".degrader must be an object");
        if (g.contains("unit")) {
            const std::string unit = require_string(g["unit"], where + ".degrader.unit");
            if (unit == "sentence") {
                d.degrader.unit_kind = DegraderUnitKind::sentence;
            } else if (unit == "element-pattern") {
                d.degrader.unit_kind = DegraderUnitKind::element_pattern;
            } else {
                throw ConfigError(where + ".degrader.unit must be sentence or element-pattern");
            }
        }
        if (g.contains("drop_probability")) {
            d.degrader.default_drop_probability =
                require_number(g["drop_probability"], where + ".degrader.drop_probability");
        }
        if (g.contains("per_unit")) {
            if (!g["per_unit"].is_object()) {
                throw ConfigError(where + ".degrader.per_unit must be an object");
            }
            for (const auto& [key, value] : g["per_unit"].items()) {
                d.degrader.per_unit_drop_probability[key] =
                    require_number(value, where + ".degrader.per_unit." + key);
            }
        }
        if (g.contains("seed")) {
            d.degrader.seed = static_cast<std::uint64_t>(
                g["seed"].is_number_unsigned() ? g["seed"].get<std::uint64_t>()
                                               : require_int(g["seed"], where + ".degrader.seed"));
        }
        if (g.contains("catalog")) {
            const std::string name = require_string(g["catalog"], where + ".degrader.catalog");
            try {
                d.degrader.units = survival::degrader_units(fixtures::load_element_catalog(name));
            } catch (const std::exception& e) {
                throw ConfigError(std::string("cannot load degrader catalog: ") + e.what());
            }
        }
        if (g.contains("units")) {
            if (!g["units"].is_array()) throw ConfigError(where + ".degrader.units must be an array");
            for (const auto& u : g["units"]) {
                DegraderUnit unit;
                unit.id = require_string(u.at("id"), where + ".degrader.units.id");
                for (const auto& p : u.at("patterns")) {
                    unit.patterns.push_back(require_string(p, where + ".degrader.units.patterns"));
                }
                d.degrader.units.push_back(std::move(unit));
            }
        }
    }
    return d;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& path) {
    if (path.empty() || path.is_absolute() || base.empty()) return path;
    return base / path;
}

SourceText fixture_source(const std::string& id, const std::string& fixture_name) {
    try {
        return {id, fixtures::load_source_text(fixture_name)};
    } catch (const std::exception& e) {
        throw ConfigError(std::string("cannot load fixture text: ") + e.what());
    }
}

std::optional<std::string> study_issue_of_source(const std::string& source_id) {
    if (source_id.rfind("housing", 0) == 0) return "housing";
    if (source_id.rfind("speech", 0) == 0) return "speech";
    return std::nullopt;
}

std::optional<std::string> emotion_label_of_source(const std::string& source_id) {
    for (const auto& label : judge::kEmotionLabels) {
        std::string lower = label;
        for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (source_id == lower) return label;
    }
    return std::nullopt;
}

}  // namespace

std::vector<SourceText> study_sources(const std::string& study) {
    std::vector<SourceText> out;
    if (study == "study1") {
        out.push_back(fixture_source("riverside", "study1_source"));
    } else if (study == "study2") {
        for (int level = 1; level <= 10; ++level) {
            char id[16], name[32];
            std::snprintf(id, sizeof(id), "level%02d", level);
            std::snprintf(name, sizeof(name), "study2_level_%02d", level);
            out.push_back(fixture_source(id, name));
        }
    } else if (study == "study3") {
        out.push_back(fixture_source("privacy", "study3_source"));
    } else if (study == "study4-competitive") {
        out.push_back(fixture_source("housing", "study4_housing_competitive"));
        out.push_back(fixture_source("speech", "study4_speech_competitive"));
    } else if (study == "study4-solo") {
        for (const char* issue : {"housing", "speech"}) {
            for (const char* frame : {"A", "B", "C", "D"}) {
                out.push_back(fixture_source(std::string(issue) + "_" + frame,
                                             std::string("study4_") + issue + "_solo_" + frame));
            }
        }
    } else if (study == "study5a-solo") {
        for (int level = 1; level <= 5; ++level) {
            out.push_back(fixture_source("intensity" + std::to_string(level),
                                         "study5a_intensity_" + std::to_string(level)));
        }
    } else if (study == "study5a-competitive") {
        out.push_back(fixture_source("competitive", "study5a_competitive"));
    } else if (study == "study5b") {
        for (const char* emotion : {"anger", "anxiety", "joy", "hope", "disgust"}) {
            out.push_back(fixture_source(emotion, std::string("study5b_") + emotion));
        }
    } else if (study != "custom") {
        throw ConfigError("unknown study id: " + study);
    }
    return out;
}

std::vector<std::string> default_judge_metrics(const std::string& study) {
    if (study == "study2") return {"assertiveness"};
    if (study == "study3") return {"framework", "advocacy"};
    if (study == "study5a-solo" || study == "study5a-competitive") {
        return {"intensity", "valence"};
    }
    if (study == "study5b") return {"emotion"};
    return {};
}

std::vector<int> default_judge_timepoints(const std::string& study, int n_steps, bool recover) {
    std::vector<int> points;
    if (study == "study2" || study == "study5b") {
        for (int t = 0; t <= n_steps; t += 10) points.push_back(t);
        if (points.empty() || points.back() != n_steps) points.push_back(n_steps);
        if (recover) points.push_back(n_steps + 1);
    } else if (study == "study3") {
        for (int t : {0, 25, 50, 75, 100}) {
            if (t <= n_steps) points.push_back(t);
        }
        if (points.back() != n_steps) points.push_back(n_steps);
    } else if (study == "study5a-solo" || study == "study5a-competitive") {
        for (int t : {0, 10, 25, 50, 75, 100}) {
            if (t <= n_steps) points.push_back(t);
        }
        if (points.back() != n_steps) points.push_back(n_steps);
        if (recover) points.push_back(n_steps + 1);
    }
    points.erase(std::unique(points.begin(), points.end()), points.end());
    return points;
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

    ExperimentConfig config;
    if (doc.contains("study")) config.study = require_string(doc["study"], "study");
    if (std::find(kStudyIds.begin(), kStudyIds.end(), config.study) == kStudyIds.end()) {
        throw ConfigError("unknown study id: " + config.study);
    }
    config.experiment_id =
        doc.contains("experiment") ? require_string(doc["experiment"], "experiment") : config.study;

    if (doc.contains("backend")) config.backend = parse_backend(doc["backend"], "backend");

    if (doc.contains("chain")) {
        const json& c = doc["chain"];
        if (!c.is_object()) throw ConfigError("chain must be an object");
        if (c.contains("steps")) config.chain.n_steps = require_int(c["steps"], "chain.steps");
        if (c.contains("recover")) {
            if (!c["recover"].is_boolean()) throw ConfigError("chain.recover must be a boolean");
            config.chain.recover = c["recover"].get<bool>();
        }
        if (c.contains("transmit_instruction")) {
            config.chain.transmit_instruction =
                require_string(c["transmit_instruction"], "chain.transmit_instruction");
        }
        if (c.contains("recover_instruction")) {
            config.chain.recover_instruction =
                require_string(c["recover_instruction"], "chain.recover_instruction");
        }
        if (c.contains("temperature")) {
            config.chain.temperature = require_number(c["temperature"], "chain.temperature");
        }
        if (c.contains("max_output_tokens")) {
            config.chain.max_output_tokens =
                require_int(c["max_output_tokens"], "chain.max_output_tokens");
        }
    }
    if (config.chain.n_steps < 1) throw ConfigError("chain.steps must be >= 1");

    if (doc.contains("runs")) config.n_runs = require_int(doc["runs"], "runs");
    if (config.n_runs < 1) throw ConfigError("runs must be >= 1");
    if (doc.contains("seed")) {
        config.base_seed = static_cast<std::uint64_t>(
            doc["seed"].is_number_unsigned() ? doc["seed"].get<std::uint64_t>()
                                             : require_int(doc["seed"], "seed"));
    }
    if (doc.contains("rate_limit")) {
        config.rate_limit = require_number(doc["rate_limit"], "rate_limit");
    }

    if (doc.contains("store")) {
        config.store_dir = resolve(base_dir, require_string(doc["store"], "store"));
    } else {
        config.store_dir = resolve(base_dir, std::filesystem::path("runs") / config.experiment_id);
    }
    if (doc.contains("output")) {
        config.output_dir = resolve(base_dir, require_string(doc["output"], "output"));
    } else {
        config.output_dir =
            resolve(base_dir, std::filesystem::path("analysis") / config.experiment_id);
    }
    if (doc.contains("cache")) {
        config.cache_dir = resolve(base_dir, require_string(doc["cache"], "cache"));
    }

    if (doc.contains("sources")) {
        if (!doc["sources"].is_array()) throw ConfigError("sources must be an array");
        for (const auto& s : doc["sources"]) {
            if (!s.is_object() || !s.contains("id")) {
                throw ConfigError("each source needs an \"id\"");
            }
            SourceText source;
            source.id = require_string(s["id"], "source id");
            if (s.contains("text")) {
                source.text = require_string(s["text"], "source text");
            } else if (s.contains("file")) {
                const auto path = resolve(base_dir, require_string(s["file"], "source file"));
                std::ifstream in(path, std::ios::binary);
                if (!in) throw ConfigError("cannot read source file: " + path.string());
                std::ostringstream buffer;
                buffer << in.rdbuf();
                source.text = buffer.str();
            } else if (s.contains("fixture")) {
                source = fixture_source(source.id,
                                        require_string(s["fixture"], "source fixture"));
            } else {
                throw ConfigError("source " + source.id + " needs text, file, or fixture");
            }
            if (source.text.empty()) throw ConfigError("source " + source.id + " is empty");
            config.sources.push_back(std::move(source));
        }
    } else {
        config.sources = study_sources(config.study);
    }
    if (config.sources.empty()) {
        throw ConfigError("no sources: custom studies must list sources explicitly");
    }
    {
        std::set<std::string> seen;
        for (const auto& s : config.sources) {
            if (!seen.insert(s.id).second) throw ConfigError("duplicate source id: " + s.id);
        }
    }

    config.judge.metrics = default_judge_metrics(config.study);
    config.judge.timepoints =
        default_judge_timepoints(config.study, config.chain.n_steps, config.chain.recover);
    if (doc.contains("judge")) {
        const json& j = doc["judge"];
        if (!j.is_object()) throw ConfigError("judge must be an object");
        if (j.contains("backend")) {
            config.judge.backend = parse_backend(j["backend"], "judge.backend");
            config.judge.configured = true;
        }
        if (j.contains("temperature")) {
            config.judge.temperature = require_number(j["temperature"], "judge.temperature");
        }
        if (j.contains("retry")) config.judge.retry = parse_retry(j["retry"]);
        if (j.contains("timepoints")) {
            if (!j["timepoints"].is_array()) throw ConfigError("judge.timepoints must be an array");
            config.judge.timepoints.clear();
            for (const auto& t : j["timepoints"]) {
                config.judge.timepoints.push_back(require_int(t, "judge.timepoints"));
            }
        }
        if (j.contains("metrics")) {
            if (!j["metrics"].is_array()) throw ConfigError("judge.metrics must be an array");
            config.judge.metrics.clear();
            for (const auto& m : j["metrics"]) {
                config.judge.metrics.push_back(require_string(m, "judge.metrics"));
            }
        }
    }
    const int last_valid = config.chain.n_steps + (config.chain.recover ? 1 : 0);
    for (int t : config.judge.timepoints) {
        if (t < 0 || t > last_valid) {
            throw ConfigError("judge timepoint " + std::to_string(t) + " outside [0, " +
                              std::to_string(last_valid) + "]");
        }
    }
    std::sort(config.judge.timepoints.begin(), config.judge.timepoints.end());
    config.judge.timepoints.erase(
        std::unique(config.judge.timepoints.begin(), config.judge.timepoints.end()),
        config.judge.timepoints.end());
    for (const auto& metric : config.judge.metrics) {
        static const std::set<std::string> known = {"assertiveness", "framework", "advocacy",
                                                    "intensity",     "valence",   "emotion"};
        if (!known.count(metric)) throw ConfigError("unknown judge metric: " + metric);
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

chain::ExperimentPlan make_plan(const ExperimentConfig& config) {
    chain::ExperimentPlan plan;
    plan.experiment_id = config.experiment_id;
    for (const auto& source : config.sources) {
        plan.sources.emplace_back(source.id, source.text);
    }
    plan.chain = config.chain;
    plan.n_runs = config.n_runs;
    plan.base_seed = config.base_seed;
    return plan;
}

namespace {

std::shared_ptr<Backend> build_backend(const BackendDescriptor& descriptor, double rate_limit,
                                        Backend* override_backend) {
    std::shared_ptr<Backend> backend;
    if (override_backend != nullptr) {
        backend = std::shared_ptr<Backend>(override_backend, [](Backend*) {});
    } else {
        try {
            backend = make_backend(descriptor);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
    if (rate_limit > 0.0) {
        backend = std::make_shared<ThrottledBackend>(backend,
                                                     std::make_shared<RateLimiter>(rate_limit));
    }
    return backend;
}

}  // namespace

int cmd_run(const ExperimentConfig& config, const chain::ExecutionOptions& options,
            std::ostream& log, Backend* backend_override) {
    std::shared_ptr<Backend> backend;
    try {
        backend = build_backend(config.backend, config.rate_limit, backend_override);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    chain::TrajectoryStore store(config.store_dir);
    const auto plan = make_plan(config);
    chain::ExecutionReport report;
    try {
        report = chain::execute_plan(plan, *backend, store, options);
    } catch (const chain::PlanMismatchError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const chain::ResumeRequiredError& e) {
        log << e.what() << "\n";
        return kExitPartial;
    }

    log << "runs completed: " << report.completed << ", already done: " << report.skipped_existing
        << ", failed: " << report.failed << ", not attempted: " << report.not_attempted << "\n";
    for (const auto& [run, error] : report.errors) {
        log << "  " << run << ": " << error << "\n";
    }
    if (report.fully_complete()) return kExitSuccess;
    if (report.completed == 0 && report.skipped_existing == 0 && report.failed > 0) {
        return kExitBackend;
    }
    return kExitPartial;
}

namespace {

struct LoadedRuns {
    std::vector<chain::Trajectory> complete;
    int partial = 0;
};

LoadedRuns load_complete_runs(const chain::TrajectoryStore& store, const std::string& source_id,
                              const ExperimentConfig& config) {
    LoadedRuns out;
    for (int run : store.existing_runs(source_id)) {
        chain::Trajectory t = store.load_run(source_id, run, config.base_seed);
        if (t.complete(config.chain)) {
            out.complete.push_back(std::move(t));
        } else {
            ++out.partial;
        }
    }
    return out;
}

std::vector<int> all_timepoints(const ExperimentConfig& config) {
    std::vector<int> points;
    for (int t = 0; t <= config.chain.n_steps; ++t) points.push_back(t);
    if (config.chain.recover) points.push_back(config.chain.n_steps + 1);
    return points;
}

/// judged.csv contents split into numeric and label-valued metrics.
struct JudgedData {
    /// metric -> source -> timepoint -> run index -> value
    std::map<std::string, std::map<std::string, std::map<int, std::map<int, double>>>> numeric;
    /// source -> timepoint -> run index -> label
    std::map<std::string, std::map<int, std::map<int, std::string>>> labels;
    std::set<int> timepoints;
    bool loaded = false;
};

int run_index_of(const std::string& run_id) {
    const auto slash = run_id.find('/');
    const auto underscore = run_id.rfind('_');
    if (slash == std::string::npos || underscore == std::string::npos) return -1;
    return std::atoi(run_id.c_str() + underscore + 1);
}

std::string source_of(const std::string& run_id) {
    const auto slash = run_id.find('/');
    return slash == std::string::npos ? run_id : run_id.substr(0, slash);
}

JudgedData load_judged(const std::filesystem::path& output_dir) {
    JudgedData data;
    const auto path = output_dir / "judged.csv";
    if (!std::filesystem::exists(path)) return data;
    const csv::Table table = csv::read_file(path);
    const auto run_col = table.column("run");
    const auto t_col = table.column("t");
    const auto metric_col = table.column("metric");
    const auto value_col = table.column("value");
    for (const auto& row : table.rows) {
        const std::string& run_id = row[run_col];
        const int t = std::atoi(row[t_col].c_str());
        const std::string& metric = row[metric_col];
        const std::string& value = row[value_col];
        if (value.empty()) continue;
        data.timepoints.insert(t);
        const std::string source = source_of(run_id);
        const int run = run_index_of(run_id);
        if (metric == "emotion_primary") {
            data.labels[source][t][run] = value;
        } else {
            char* end = nullptr;
            const double v = std::strtod(value.c_str(), &end);
            if (end != value.c_str()) data.numeric[metric][source][t][run] = v;
        }
    }
    data.loaded = true;
    return data;
}

void write_judged_summary(const JudgedData& judged, const std::filesystem::path& output_dir) {
    csv::Table table;
    table.header = {"source", "t", "metric", "n", "mean", "sd", "sem", "ci_lo", "ci_hi"};
    for (const auto& [metric, by_source] : judged.numeric) {
        for (const auto& [source, by_t] : by_source) {
            for (const auto& [t, by_run] : by_t) {
                std::vector<double> values;
                for (const auto& [run, v] : by_run) values.push_back(v);
                if (values.empty()) continue;
                const auto s = stats::summarize(values);
                table.rows.push_back({source, std::to_string(t), metric,
                                      std::to_string(s.n), num(s.mean), num(s.sd), num(s.sem),
                                      s.ci_defined ? num(s.ci_lo) : "",
                                      s.ci_defined ? num(s.ci_hi) : ""});
            }
        }
    }
    csv::write_file(output_dir / "judged_summary.csv", table);
}

/// Start/end convergence statistics for one numeric metric across sources.
void write_reduction(const JudgedData& judged, const std::string& metric, int n_steps,
                     const std::filesystem::path& output_dir) {
    auto it = judged.numeric.find(metric);
    if (it == judged.numeric.end()) return;

    int t0 = -1, t_end = -1;
    for (int t : judged.timepoints) {
        if (t > n_steps) continue;
        if (t0 < 0) t0 = t;
        t_end = t;
    }
    if (t0 < 0 || t_end <= t0) return;

    std::vector<std::pair<double, double>> series;
    std::vector<std::vector<double>> final_groups;
    for (const auto& [source, by_t] : it->second) {
        const auto start_it = by_t.find(t0);
        const auto end_it = by_t.find(t_end);
        if (start_it == by_t.end() || end_it == by_t.end()) continue;
        auto mean_of = [](const std::map<int, double>& by_run) {
            double sum = 0.0;
            for (const auto& [run, v] : by_run) sum += v;
            return sum / static_cast<double>(by_run.size());
        };
        if (start_it->second.empty() || end_it->second.empty()) continue;
        series.emplace_back(mean_of(start_it->second), mean_of(end_it->second));
        std::vector<double> group;
        for (const auto& [run, v] : end_it->second) group.push_back(v);
        final_groups.push_back(std::move(group));
    }
    if (series.size() < 2) return;

    const auto reduction = stats::range_and_variance_reduction(series);
    csv::Table table;
    table.header = {"metric",      "t_start",       "t_end",
                    "range_start", "range_end",     "range_reduction_pct",
                    "variance_start", "variance_end", "variance_reduction_pct"};
    table.rows.push_back({metric, std::to_string(t0), std::to_string(t_end),
                          num(reduction.range_start), num(reduction.range_end),
                          num(reduction.range_reduction_pct), num(reduction.variance_start),
                          num(reduction.variance_end), num(reduction.variance_reduction_pct)});
    csv::write_file(output_dir / "reduction.csv", table);

    bool anova_ok = final_groups.size() >= 2;
    for (const auto& g : final_groups) anova_ok = anova_ok && g.size() >= 2;
    if (anova_ok) {
        const auto anova = stats::one_way_anova(final_groups);
        csv::Table ftab;
        ftab.header = {"metric", "t", "f", "df_between", "df_within", "p"};
        ftab.rows.push_back({metric, std::to_string(t_end), num(anova.f),
                             num(anova.df_between), num(anova.df_within), num(anova.p)});
        csv::write_file(output_dir / "final_anova.csv", ftab);
    }
}

void write_valence_drift(const JudgedData& judged, const std::string& metric, int n_steps,
                         const std::filesystem::path& output_dir) {
    auto it = judged.numeric.find(metric);
    if (it == judged.numeric.end()) return;
    int t0 = -1, t_end = -1;
    for (int t : judged.timepoints) {
        if (t > n_steps) continue;
        if (t0 < 0) t0 = t;
        t_end = t;
    }
    if (t0 < 0 || t_end <= t0) return;

    csv::Table table;
    table.header = {"source", "metric", "t0", "t1", "mean_t0", "mean_t1", "drift",
                    "t_stat", "df", "p", "degenerate"};
    for (const auto& [source, by_t] : it->second) {
        const auto start_it = by_t.find(t0);
        const auto end_it = by_t.find(t_end);
        if (start_it == by_t.end() || end_it == by_t.end()) continue;
        std::vector<std::optional<double>> at_t0, at_t1;
        for (const auto& [run, v] : start_it->second) at_t0.emplace_back(v);
        for (const auto& [run, v] : end_it->second) at_t1.emplace_back(v);
        if (at_t0.size() < 2 || at_t1.size() < 2) continue;
        const auto drift = stats::valence_drift(at_t0, at_t1);
        table.rows.push_back({source, metric, std::to_string(t0), std::to_string(t_end),
                              num(drift.mean_t0), num(drift.mean_t1), num(drift.drift),
                              num(drift.test.t), num(drift.test.df), num(drift.test.p),
                              drift.test.degenerate ? "1" : "0"});
    }
    if (!table.rows.empty()) csv::write_file(output_dir / "valence_drift.csv", table);
}

void write_emotion_tables(const JudgedData& judged, const ExperimentConfig& config,
                          const std::filesystem::path& output_dir) {
    if (judged.labels.empty()) return;

    csv::Table preservation;
    preservation.header = {"source", "t", "rate", "n_valid", "n_total"};
    std::map<std::string, std::vector<std::optional<std::string>>> final_by_source;

    std::vector<int> points(judged.timepoints.begin(), judged.timepoints.end());
    const int final_t = config.chain.n_steps;
    for (const auto& source : config.sources) {
        const auto label = emotion_label_of_source(source.id);
        if (!label) continue;
        const auto source_it = judged.labels.find(source.id);
        if (source_it == judged.labels.end()) continue;
        for (int t : points) {
            const auto t_it = source_it->second.find(t);
            if (t_it == source_it->second.end()) continue;
            std::vector<std::optional<std::string>> classified;
            int max_run = 0;
            for (const auto& [run, l] : t_it->second) max_run = std::max(max_run, run);
            classified.resize(static_cast<std::size_t>(max_run));
            for (const auto& [run, l] : t_it->second) {
                if (run >= 1) classified[static_cast<std::size_t>(run - 1)] = l;
            }
            const auto cell = stats::preservation_rate(*label, classified);
            preservation.rows.push_back({source.id, std::to_string(t), num(cell.rate),
                                         std::to_string(cell.n_valid),
                                         std::to_string(cell.n_total)});
            if (t == final_t) final_by_source[*label] = classified;
        }
    }
    if (!preservation.rows.empty()) {
        csv::write_file(output_dir / "preservation.csv", preservation);
    }

    if (!final_by_source.empty()) {
        std::vector<std::string> labels(judge::kEmotionLabels.begin(),
                                        judge::kEmotionLabels.end());
        const auto matrix = stats::transition_matrix(labels, final_by_source);
        csv::Table table;
        table.header = {"from", "to", "probability", "row_valid", "row_count"};
        for (std::size_t r = 0; r < labels.size(); ++r) {
            for (std::size_t c = 0; c < labels.size(); ++c) {
                table.rows.push_back({labels[r], labels[c],
                                      matrix.row_valid[r] ? num(matrix.rows[r][c]) : "",
                                      matrix.row_valid[r] ? "1" : "0",
                                      std::to_string(matrix.row_counts[r])});
            }
        }
        csv::write_file(output_dir / "transitions.csv", table);
    }
}

void analyze_survival(const ExperimentConfig& config, const chain::TrajectoryStore& store,
                      std::ostream& log, const std::filesystem::path& output_dir) {
    survival::ElementCatalog catalog;
    try {
        catalog = fixtures::load_element_catalog();
    } catch (const std::exception& e) {
        log << "skipping survival analysis: " << e.what() << "\n";
        return;
    }

    std::vector<int> curve_points;
    for (int t = 0; t <= config.chain.n_steps; ++t) curve_points.push_back(t);

    csv::Table presence_tab;
    presence_tab.header = {"run", "t", "element", "present"};
    csv::Table curve_tab;
    curve_tab.header = {"t", "mean_count", "ci_lo", "ci_hi", "n_runs"};
    csv::Table tier_tab;
    tier_tab.header = {"tier", "t", "mean_count", "ci_lo", "ci_hi"};
    csv::Table element_tab;
    element_tab.header = {"element", "t", "survival"};
    csv::Table half_tab;
    half_tab.header = {"element", "half_life", "censored"};
    csv::Table recovery_tab;
    recovery_tab.header = {"run",          "elements_final",  "elements_recovered",
                           "element_delta", "words_final",    "words_recovered",
                           "word_delta"};

    for (const auto& source : config.sources) {
        const auto loaded = load_complete_runs(store, source.id, config);
        if (loaded.partial > 0) {
            log << "note: " << loaded.partial << " partial runs of " << source.id
                << " excluded from analysis\n";
        }
        if (loaded.complete.empty()) continue;
        const auto matrix = survival::survival_matrix(loaded.complete, curve_points, catalog);

        for (std::size_t r = 0; r < matrix.run_ids.size(); ++r) {
            for (std::size_t ti = 0; ti < matrix.timepoints.size(); ++ti) {
                for (std::size_t e = 0; e < matrix.element_ids.size(); ++e) {
                    presence_tab.rows.push_back({matrix.run_ids[r],
                                                 std::to_string(matrix.timepoints[ti]),
                                                 matrix.element_ids[e],
                                                 matrix.presence[r][ti][e] ? "1" : "0"});
                }
            }
        }
        for (std::size_t ti = 0; ti < matrix.timepoints.size(); ++ti) {
            const auto s = matrix.count_summary(ti);
            curve_tab.rows.push_back({std::to_string(matrix.timepoints[ti]), num(s.mean),
                                      s.ci_defined ? num(s.ci_lo) : "",
                                      s.ci_defined ? num(s.ci_hi) : "", std::to_string(s.n)});
            for (const auto& tier : catalog.tiers()) {
                const auto ts = matrix.tier_count_summary(catalog, tier, ti);
                tier_tab.rows.push_back({tier, std::to_string(matrix.timepoints[ti]),
                                         num(ts.mean), ts.ci_defined ? num(ts.ci_lo) : "",
                                         ts.ci_defined ? num(ts.ci_hi) : ""});
            }
        }
        for (const auto& element : matrix.element_ids) {
            const auto curve = survival::survival_curve(matrix, element);
            for (std::size_t ti = 0; ti < curve.size(); ++ti) {
                element_tab.rows.push_back({element, std::to_string(matrix.timepoints[ti]),
                                            num(curve[ti])});
            }
            const auto hl = survival::half_life(curve, matrix.timepoints);
            if (std::holds_alternative<int>(hl)) {
                half_tab.rows.push_back({element, std::to_string(std::get<int>(hl)), "0"});
            } else {
                half_tab.rows.push_back(
                    {element, std::to_string(std::get<survival::Censored>(hl).last_timepoint),
                     "1"});
            }
        }
        if (config.chain.recover) {
            for (const auto& run : loaded.complete) {
                const auto* final_signal = run.at_step(config.chain.n_steps);
                const auto* recovered = run.at_step(config.chain.n_steps + 1);
                if (final_signal == nullptr || recovered == nullptr) continue;
                const auto final_elements =
                    survival::detect_elements(final_signal->text, catalog);
                const auto rec_elements = survival::detect_elements(recovered->text, catalog);
                const long words_final = static_cast<long>(text::word_count(final_signal->text));
                const long words_rec = static_cast<long>(text::word_count(recovered->text));
                recovery_tab.rows.push_back(
                    {run.run_id, std::to_string(final_elements.size()),
                     std::to_string(rec_elements.size()),
                     std::to_string(static_cast<long>(rec_elements.size()) -
                                    static_cast<long>(final_elements.size())),
                     std::to_string(words_final), std::to_string(words_rec),
                     std::to_string(words_rec - words_final)});
            }
        }
    }

    csv::write_file(output_dir / "survival.csv", presence_tab);
    csv::write_file(output_dir / "survival_curve.csv", curve_tab);
    csv::write_file(output_dir / "tier_curves.csv", tier_tab);
    csv::write_file(output_dir / "element_curves.csv", element_tab);
    csv::write_file(output_dir / "half_life.csv", half_tab);
    if (config.chain.recover) csv::write_file(output_dir / "recovery.csv", recovery_tab);
}

void analyze_lexical(const ExperimentConfig& config, const chain::TrajectoryStore& store,
                     std::ostream& log, const std::filesystem::path& output_dir) {
    lexical::LexiconSet lexicons;
    std::vector<lexical::PerspectiveSpec> perspectives;
    try {
        lexicons = fixtures::load_lexicons();
        perspectives = fixtures::load_perspectives();
    } catch (const std::exception& e) {
        log << "skipping lexical analysis: " << e.what() << "\n";
        return;
    }
    const auto& tradeoff = lexicons.at("tradeoff");

    csv::Table table;
    table.header = {"run", "t", "metric", "value"};
    for (const auto& source : config.sources) {
        const auto loaded = load_complete_runs(store, source.id, config);
        for (const auto& run : loaded.complete) {
            for (const auto& signal : run.signals) {
                const std::string t = std::to_string(signal.step);
                auto add = [&](const std::string& metric, double value) {
                    table.rows.push_back({run.run_id, t, metric, num(value)});
                };
                add("framework_density", lexical::density(signal.text, lexicons.at("framework")));
                add("perspectival_density",
                    lexical::density(signal.text, lexicons.at("perspectival")));
                add("instructional_density",
                    lexical::density(signal.text, lexicons.at("instructional")));
                add("tension_density", lexical::density(signal.text, lexicons.at("tension")));
                add("structures",
                    static_cast<double>(lexical::count_structures(signal.text)));
                add("perspective_count", static_cast<double>(lexical::count_perspectives(
                                             signal.text, perspectives)));
                add("tradeoff", lexical::tradeoff_flag(signal.text, tradeoff) ? 1.0 : 0.0);
            }
        }
    }
    csv::write_file(output_dir / "lexical.csv", table);
}

void analyze_fidelity(const ExperimentConfig& config, const chain::TrajectoryStore& store,
                      std::ostream& log, const std::filesystem::path& output_dir) {
    std::map<std::string, std::vector<frames::FrameSpec>> frames_by_issue;
    for (const auto& source : config.sources) {
        const auto issue = study_issue_of_source(source.id);
        if (!issue || frames_by_issue.count(*issue)) continue;
        try {
            frames_by_issue[*issue] = fixtures::load_frames(*issue);
        } catch (const std::exception& e) {
            log << "skipping fidelity for issue " << *issue << ": " << e.what() << "\n";
        }
    }
    if (frames_by_issue.empty()) return;

    csv::Table fid_tab;
    fid_tab.header = {"run", "t", "frame", "fidelity"};
    csv::Table agg_tab;
    agg_tab.header = {"run",  "t",   "issue",        "strong", "weak",
                      "strength_gap", "pro", "con", "direction_gap"};
    csv::Table gap_tab;
    gap_tab.header = {"issue", "t", "comparison", "mean_gap", "t_stat", "df", "p", "degenerate"};

    std::map<std::string, std::vector<double>> strength_gaps_final;
    std::map<std::string, std::vector<double>> direction_gaps_final;

    for (const auto& source : config.sources) {
        const auto issue = study_issue_of_source(source.id);
        if (!issue || !frames_by_issue.count(*issue)) continue;
        const auto& issue_frames = frames_by_issue[*issue];
        const auto loaded = load_complete_runs(store, source.id, config);
        for (const auto& run : loaded.complete) {
            for (const auto& signal : run.signals) {
                frames::FidelityRecord record;
                record.run_id = run.run_id;
                record.timepoint = signal.step;
                for (const auto& frame : issue_frames) {
                    const double f = frames::fidelity(signal.text, frame);
                    record.by_frame[frame.id] = f;
                    fid_tab.rows.push_back({run.run_id, std::to_string(signal.step), frame.id,
                                            num(f)});
                }
                const auto strength = frames::strength_aggregate(record);
                const auto direction = frames::direction_aggregate(record);
                agg_tab.rows.push_back({run.run_id, std::to_string(signal.step), *issue,
                                        num(strength.strong), num(strength.weak),
                                        num(strength.gap), num(direction.pro),
                                        num(direction.con), num(direction.gap)});
                if (signal.step == config.chain.n_steps) {
                    strength_gaps_final[*issue].push_back(strength.gap);
                    direction_gaps_final[*issue].push_back(direction.gap);
                }
            }
        }
    }

    for (const auto& [issue, gaps] : strength_gaps_final) {
        if (gaps.size() < 2) continue;
        const auto test = frames::gap_t_test(gaps);
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
        gap_tab.rows.push_back({issue, std::to_string(config.chain.n_steps), "strong_vs_weak",
                                num(mean), num(test.t), num(test.df), num(test.p),
                                test.degenerate ? "1" : "0"});
    }
    for (const auto& [issue, gaps] : direction_gaps_final) {
        if (gaps.size() < 2) continue;
        const auto test = frames::gap_t_test(gaps);
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
        gap_tab.rows.push_back({issue, std::to_string(config.chain.n_steps), "pro_vs_con",
                                num(mean), num(test.t), num(test.df), num(test.p),
                                test.degenerate ? "1" : "0"});
    }

    csv::write_file(output_dir / "fidelity.csv", fid_tab);
    csv::write_file(output_dir / "fidelity_aggregates.csv", agg_tab);
    if (!gap_tab.rows.empty()) csv::write_file(output_dir / "gap_tests.csv", gap_tab);
}

void analyze_generic(const ExperimentConfig& config, const chain::TrajectoryStore& store,
                     std::ostream& log, const std::filesystem::path& output_dir) {
    csv::Table words_tab;
    words_tab.header = {"run", "t", "words"};
    csv::Table sim_tab;
    sim_tab.header = {"run", "t", "similarity"};
    const survival::TermFrequencyEmbedder embedder;

    int total_runs = 0;
    for (const auto& source : config.sources) {
        const auto loaded = load_complete_runs(store, source.id, config);
        total_runs += static_cast<int>(loaded.complete.size());
        for (const auto& run : loaded.complete) {
            const auto* source_signal = run.at_step(0);
            for (const auto& signal : run.signals) {
                words_tab.rows.push_back({run.run_id, std::to_string(signal.step),
                                          std::to_string(text::word_count(signal.text))});
                sim_tab.rows.push_back(
                    {run.run_id, std::to_string(signal.step),
                     num(survival::similarity(source_signal->text, signal.text, embedder))});
            }
        }
    }
    if (total_runs == 0) {
        throw std::runtime_error("no complete runs in store at " + store.root().string());
    }
    csv::write_file(output_dir / "word_count.csv", words_tab);
    csv::write_file(output_dir / "similarity.csv", sim_tab);
    log << "analyzed " << total_runs << " complete runs\n";
}

}  // namespace

int cmd_analyze(const ExperimentConfig& config, std::ostream& log) {
    if (!std::filesystem::is_directory(config.store_dir)) {
        log << "config error: no trajectory store at " << config.store_dir.string() << "\n";
        return kExitConfig;
    }
    chain::TrajectoryStore store(config.store_dir);
    std::filesystem::create_directories(config.output_dir);

    try {
        analyze_generic(config, store, log, config.output_dir);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    if (config.study == "study1") {
        analyze_survival(config, store, log, config.output_dir);
    }
    if (config.study == "study3") {
        analyze_lexical(config, store, log, config.output_dir);
    }
    if (config.study == "study4-competitive" || config.study == "study4-solo") {
        analyze_fidelity(config, store, log, config.output_dir);
    }

    const auto judged = load_judged(config.output_dir);
    if (judged.loaded) {
        write_judged_summary(judged, config.output_dir);
        if (config.study == "study2") {
            write_reduction(judged, "assertiveness", config.chain.n_steps, config.output_dir);
        }
        if (config.study == "study5a-solo") {
            write_reduction(judged, "intensity_overall", config.chain.n_steps, config.output_dir);
        }
        if (config.study == "study5a-solo" || config.study == "study5a-competitive") {
            write_valence_drift(judged, "valence_overall", config.chain.n_steps,
                                config.output_dir);
        }
        if (config.study == "study5b") {
            write_valence_drift(judged, "valence", config.chain.n_steps, config.output_dir);
            write_emotion_tables(judged, config, config.output_dir);
        }
    }

    log << "analysis written to " << config.output_dir.string() << "\n";
    return kExitSuccess;
}

namespace {

struct JudgeItem {
    std::string run_id;
    int timepoint = 0;
    std::string text;
};

void append_metric_rows(std::vector<csv::Row>& rows, const JudgeItem& item,
                        const std::string& metric, judge::Judge& j) {
    auto add = [&](const std::string& name, const std::string& value) {
        rows.push_back({item.run_id, std::to_string(item.timepoint), name, value});
    };
    auto add_triple = [&](const std::string& prefix,
                          const std::optional<judge::JudgeScore>& score) {
        add(prefix + "_overall", score ? std::to_string(score->overall) : "");
        add(prefix + "_lowest", score ? std::to_string(score->lowest) : "");
        add(prefix + "_highest", score ? std::to_string(score->highest) : "");
    };
    if (metric == "assertiveness") {
        const auto v = j.assertiveness(item.text);
        add("assertiveness", v ? std::to_string(*v) : "");
    } else if (metric == "framework") {
        const auto v = j.framework(item.text);
        add("framework", v ? std::to_string(*v) : "");
    } else if (metric == "advocacy") {
        const auto v = j.advocacy(item.text);
        add("advocacy", v ? std::to_string(*v) : "");
    } else if (metric == "intensity") {
        add_triple("intensity", j.intensity(item.text));
    } else if (metric == "valence") {
        add_triple("valence", j.valence(item.text));
    } else if (metric == "emotion") {
        const auto profile = j.emotion(item.text);
        add("emotion_primary", profile ? profile->primary : "");
        for (const auto& label : judge::kEmotionLabels) {
            std::string key = "emotion_";
            for (char c : label) {
                key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            }
            add(key, profile ? std::to_string(profile->intensities.at(label)) : "");
        }
        add("valence", profile ? std::to_string(profile->valence) : "");
    }
}

}  // namespace

int cmd_judge(const ExperimentConfig& config, int workers, std::ostream& log,
              Backend* judge_override) {
    if (config.judge.metrics.empty()) {
        log << "config error: study " << config.study << " defines no judged metrics\n";
        return kExitConfig;
    }
    if (!config.judge.configured && judge_override == nullptr) {
        log << "config error: no judge backend configured\n";
        return kExitConfig;
    }
    if (config.judge.timepoints.empty()) {
        log << "config error: no judge timepoints\n";
        return kExitConfig;
    }
    if (!std::filesystem::is_directory(config.store_dir)) {
        log << "config error: no trajectory store at " << config.store_dir.string() << "\n";
        return kExitConfig;
    }

    std::shared_ptr<Backend> backend;
    try {
        backend = build_backend(config.judge.backend, config.rate_limit, judge_override);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    std::unique_ptr<ResponseCache> cache;
    if (!config.cache_dir.empty()) {
        cache = std::make_unique<ResponseCache>(config.cache_dir / "judge");
    }
    judge::PromptSet prompts;
    try {
        prompts = fixtures::load_prompt_set();
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    chain::TrajectoryStore store(config.store_dir);
    std::vector<JudgeItem> items;
    for (const auto& source : config.sources) {
        const auto loaded = load_complete_runs(store, source.id, config);
        if (loaded.partial > 0) {
            log << "note: " << loaded.partial << " partial runs of " << source.id
                << " excluded from judging\n";
        }
        for (const auto& run : loaded.complete) {
            for (int t : config.judge.timepoints) {
                const auto* signal = run.at_step(t);
                if (signal == nullptr) continue;
                items.push_back({run.run_id, t, signal->text});
            }
        }
    }
    if (items.empty()) {
        log << "config error: nothing to judge (no complete runs)\n";
        return kExitConfig;
    }

    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(items.size())));
    std::vector<std::vector<csv::Row>> rows_per_item(items.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<std::uint64_t> attempts{0}, failures{0};
    std::mutex error_mutex;
    std::string transport_error;

    auto worker = [&] {
        judge::Judge j(*backend, config.judge.backend, prompts, config.judge.temperature,
                       config.judge.retry, cache.get());
        while (true) {
            const std::size_t index = cursor.fetch_add(1);
            if (index >= items.size()) break;
            const auto& item = items[index];
            for (const auto& metric : config.judge.metrics) {
                try {
                    append_metric_rows(rows_per_item[index], item, metric, j);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (transport_error.empty()) transport_error = e.what();
                }
            }
        }
        attempts += j.parse_attempts();
        failures += j.parse_failures();
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    csv::Table table;
    table.header = {"run", "t", "metric", "value"};
    std::size_t missing = 0;
    for (const auto& rows : rows_per_item) {
        for (const auto& row : rows) {
            if (row[3].empty()) ++missing;
            table.rows.push_back(row);
        }
    }
    std::filesystem::create_directories(config.output_dir);
    csv::write_file(config.output_dir / "judged.csv", table);

    const std::uint64_t a = attempts.load(), f = failures.load();
    log << "judged " << items.size() << " texts; " << table.rows.size() << " records, "
        << missing << " missing\n";
    if (a > 0) {
        log << "parse success rate: "
            << num(100.0 * static_cast<double>(a - f) / static_cast<double>(a)) << "% (" << (a - f)
            << "/" << a << ")\n";
    }
    if (!transport_error.empty()) {
        log << "backend failure during judging: " << transport_error << "\n";
        if (missing == table.rows.size()) return kExitBackend;
    }
    return kExitSuccess;
}

namespace {

csv::Table read_csv_if_present(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    return csv::read_file(path);
}

/// Mean of a numeric column grouped by (series key, t).
std::map<std::string, std::map<int, double>> group_mean(const csv::Table& table,
                                                        const std::string& series_col,
                                                        const std::string& t_col,
                                                        const std::string& value_col) {
    std::map<std::string, std::map<int, std::pair<double, int>>> acc;
    if (table.header.empty()) return {};
    const auto si = table.column(series_col);
    const auto ti = table.column(t_col);
    const auto vi = table.column(value_col);
    for (const auto& row : table.rows) {
        if (row[vi].empty()) continue;
        auto& cell = acc[row[si]][std::atoi(row[ti].c_str())];
        cell.first += std::strtod(row[vi].c_str(), nullptr);
        cell.second += 1;
    }
    std::map<std::string, std::map<int, double>> out;
    for (const auto& [key, by_t] : acc) {
        for (const auto& [t, cell] : by_t) out[key][t] = cell.first / cell.second;
    }
    return out;
}

svg::LineChart chart_from_groups(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::map<std::string, std::map<int, double>>& groups) {
    svg::LineChart chart;
    chart.title = title;
    chart.x_label = x_label;
    chart.y_label = y_label;
    for (const auto& [label, by_t] : groups) {
        svg::Series series;
        series.label = label;
        for (const auto& [t, v] : by_t) series.points.push_back({static_cast<double>(t), v});
        chart.series.push_back(std::move(series));
    }
    return chart;
}

}  // namespace

int cmd_report(const ExperimentConfig& config, std::ostream& log) {
    if (!std::filesystem::is_directory(config.output_dir)) {
        log << "config error: no analysis directory at " << config.output_dir.string() << "\n";
        return kExitConfig;
    }
    const auto report_dir = config.output_dir / "report";
    std::filesystem::create_directories(report_dir);

    {
        csv::Table words = read_csv_if_present(config.output_dir / "word_count.csv");
        svg::write_svg(report_dir / "word_count.svg",
                       svg::render_line_chart(chart_from_groups(
                           "Word count over transmission", "step", "words",
                           group_mean(words, "run", "t", "words"))));
        csv::Table sim = read_csv_if_present(config.output_dir / "similarity.csv");
        svg::write_svg(report_dir / "similarity.svg",
                       svg::render_line_chart(chart_from_groups(
                           "Similarity to source", "step", "cosine similarity",
                           group_mean(sim, "run", "t", "similarity"))));
    }

    {
        csv::Table curve = read_csv_if_present(config.output_dir / "survival_curve.csv");
        csv::Table tiers = read_csv_if_present(config.output_dir / "tier_curves.csv");
        svg::LineChart chart;
        chart.title = "Element survival";
        chart.x_label = "step";
        chart.y_label = "surviving elements";
        if (!curve.header.empty()) {
            svg::Series overall;
            overall.label = "all elements";
            const auto ti = curve.column("t");
            const auto mi = curve.column("mean_count");
            const auto li = curve.column("ci_lo");
            const auto hi = curve.column("ci_hi");
            bool all_bands = true;
            for (const auto& row : curve.rows) {
                overall.points.push_back(
                    {static_cast<double>(std::atoi(row[ti].c_str())),
                     std::strtod(row[mi].c_str(), nullptr)});
                if (row[li].empty() || row[hi].empty()) {
                    all_bands = false;
                } else {
                    overall.band.push_back({std::strtod(row[li].c_str(), nullptr),
                                            std::strtod(row[hi].c_str(), nullptr)});
                }
            }
            if (!all_bands) overall.band.clear();
            chart.series.push_back(std::move(overall));
        }
        if (!tiers.header.empty()) {
            const auto gi = tiers.column("tier");
            const auto ti = tiers.column("t");
            const auto mi = tiers.column("mean_count");
            const auto li = tiers.column("ci_lo");
            const auto hi = tiers.column("ci_hi");
            std::map<std::string, svg::Series> by_tier;
            std::map<std::string, bool> has_band;
            for (const auto& row : tiers.rows) {
                auto& series = by_tier[row[gi]];
                series.label = row[gi];
                series.points.push_back({static_cast<double>(std::atoi(row[ti].c_str())),
                                         std::strtod(row[mi].c_str(), nullptr)});
                if (!row[li].empty() && !row[hi].empty()) {
                    series.band.push_back({std::strtod(row[li].c_str(), nullptr),
                                           std::strtod(row[hi].c_str(), nullptr)});
                } else {
                    has_band[row[gi]] = true;
                }
            }
            for (auto& [tier, series] : by_tier) {
                if (has_band[tier]) series.band.clear();
                chart.series.push_back(std::move(series));
            }
        }
        if (config.study == "study1" || !chart.series.empty()) {
            svg::write_svg(report_dir / "survival_curve.svg", svg::render_line_chart(chart));
        }
    }

    if (config.study == "study3") {
        csv::Table lex = read_csv_if_present(config.output_dir / "lexical.csv");
        svg::write_svg(report_dir / "lexical.svg",
                       svg::render_line_chart(chart_from_groups(
                           "Marker densities and structure", "step", "value",
                           group_mean(lex, "metric", "t", "value"))));
    }

    if (config.study == "study4-competitive" || config.study == "study4-solo") {
        csv::Table fid = read_csv_if_present(config.output_dir / "fidelity.csv");
        svg::write_svg(report_dir / "fidelity.svg",
                       svg::render_line_chart(chart_from_groups(
                           "Frame fidelity", "step", "fidelity",
                           group_mean(fid, "frame", "t", "fidelity"))));
    }

    {
        csv::Table judged = read_csv_if_present(config.output_dir / "judged_summary.csv");
        if (!judged.header.empty()) {
            const auto mi = judged.column("metric");
            std::set<std::string> metrics;
            for (const auto& row : judged.rows) metrics.insert(row[mi]);
            for (const auto& metric : metrics) {
                csv::Table filtered;
                filtered.header = judged.header;
                for (const auto& row : judged.rows) {
                    if (row[mi] == metric) filtered.rows.push_back(row);
                }
                svg::write_svg(report_dir / (metric + ".svg"),
                               svg::render_line_chart(chart_from_groups(
                                   metric + " over transmission", "step", metric,
                                   group_mean(filtered, "source", "t", "mean"))));
            }
        }
    }

    if (config.study == "study5b") {
        csv::Table trans = read_csv_if_present(config.output_dir / "transitions.csv");
        svg::Heatmap map;
        map.title = "Emotion transitions (source to final)";
        if (!trans.header.empty()) {
            const auto fi = trans.column("from");
            const auto ci = trans.column("to");
            const auto pi = trans.column("probability");
            std::vector<std::string> labels(judge::kEmotionLabels.begin(),
                                            judge::kEmotionLabels.end());
            map.row_labels = labels;
            map.col_labels = labels;
            map.values.assign(labels.size(),
                              std::vector<double>(labels.size(),
                                                  std::numeric_limits<double>::quiet_NaN()));
            auto index_of = [&](const std::string& label) -> std::ptrdiff_t {
                const auto it = std::find(labels.begin(), labels.end(), label);
                return it == labels.end() ? -1 : it - labels.begin();
            };
            for (const auto& row : trans.rows) {
                const auto r = index_of(row[fi]);
                const auto c = index_of(row[ci]);
                if (r < 0 || c < 0 || row[pi].empty()) continue;
                map.values[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                    std::strtod(row[pi].c_str(), nullptr);
            }
        }
        svg::write_svg(report_dir / "transitions.svg", svg::render_heatmap(map));

        csv::Table pres = read_csv_if_present(config.output_dir / "preservation.csv");
        svg::write_svg(report_dir / "preservation.svg",
                       svg::render_line_chart(chart_from_groups(
                           "Source emotion preservation", "step", "preservation rate",
                           group_mean(pres, "source", "t", "rate"))));
    }

    std::ofstream summary(report_dir / "summary.md", std::ios::binary | std::ios::trunc);
    summary << "# " << config.experiment_id << "\n\n";
    summary << "Study preset: " << config.study << "\n\n";
    for (const char* name :
         {"reduction.csv", "final_anova.csv", "gap_tests.csv", "valence_drift.csv",
          "half_life.csv"}) {
        const auto path = config.output_dir / name;
        if (!std::filesystem::exists(path)) continue;
        const csv::Table table = csv::read_file(path);
        summary << "## " << name << "\n\n|";
        for (const auto& h : table.header) summary << " " << h << " |";
        summary << "\n|";
        for (std::size_t i = 0; i < table.header.size(); ++i) summary << " --- |";
        summary << "\n";
        for (const auto& row : table.rows) {
            summary << "|";
            for (const auto& cell : row) summary << " " << cell << " |";
            summary << "\n";
        }
        summary << "\n";
    }
    summary.close();

    log << "report written to " << report_dir.string() << "\n";
    return kExitSuccess;
}

int cmd_validate_frames(const ExperimentConfig& config, const std::string& issue, int n_runs,
                        std::uint64_t seed, std::ostream& log, Backend* judge_override) {
    std::vector<frames::FrameSpec> specs;
    try {
        specs = fixtures::load_frames(issue);
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (!config.judge.configured && judge_override == nullptr) {
        log << "config error: no judge backend configured\n";
        return kExitConfig;
    }

    std::shared_ptr<Backend> backend;
    try {
        backend = build_backend(config.judge.backend, config.rate_limit, judge_override);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    judge::PromptSet prompts;
    try {
        prompts = fixtures::load_prompt_set();
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    std::vector<judge::FrameCandidate> candidates;
    for (const auto& spec : specs) {
        candidates.push_back({spec.id, spec.name, spec.text});
    }
    judge::Judge j(*backend, config.judge.backend, prompts, config.judge.temperature,
                   config.judge.retry, nullptr);

    judge::FrameValidationReport report;
    try {
        report = judge::validate_frames(candidates, j, n_runs, seed);
    } catch (const TransportError& e) {
        log << "backend failure: " << e.what() << "\n";
        return kExitBackend;
    } catch (const ProtocolError& e) {
        log << "backend failure: " << e.what() << "\n";
        return kExitBackend;
    }

    json doc;
    doc["issue"] = issue;
    doc["runs_requested"] = report.runs_requested;
    doc["runs_valid"] = report.runs_valid;
    doc["reliable"] = report.reliable;
    doc["consensus_order"] = report.consensus_order;
    doc["borda_points"] = report.borda_points;
    doc["mean_rank"] = report.mean_rank;
    doc["mean_scores"] = report.mean_scores;
    doc["median_scores"] = report.median_scores;
    doc["pair_distinct_rate"] = report.pair_distinct_rate;
    doc["distinctiveness_pass"] = report.distinctiveness_pass;

    std::filesystem::create_directories(config.output_dir);
    const auto path = config.output_dir / ("frame_validation_" + issue + ".json");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << "\n";
    out.close();

    std::map<std::string, std::string> names;
    for (const auto& spec : specs) names[spec.id] = spec.name;
    log << "frame validation (" << issue << "): " << report.runs_valid << "/"
        << report.runs_requested << " valid runs, "
        << (report.reliable ? "reliable" : "unreliable") << "\n";
    log << "consensus: ";
    for (std::size_t i = 0; i < report.consensus_order.size(); ++i) {
        if (i > 0) log << " > ";
        log << names[report.consensus_order[i]];
    }
    log << "\n";
    log << "distinctiveness " << (report.distinctiveness_pass ? "pass" : "fail") << " (threshold 0.8)\n";
    log << "report written to " << path.string() << "\n";
    return kExitSuccess;
}

}  // namespace relaylab::experiment
