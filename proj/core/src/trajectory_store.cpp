#include "relaylab/trajectory_store.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace relaylab::chain {

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string status_key(const std::string& source_id, int run_index) {
    return source_id + "/" + TrajectoryStore::run_name(run_index);
}

}  // namespace

TrajectoryStore::TrajectoryStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path TrajectoryStore::source_dir(const std::string& source_id) const {
    return root_ / source_id;
}

std::string TrajectoryStore::run_name(int run_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run_%04d", run_index);
    return buf;
}

std::filesystem::path TrajectoryStore::run_file(const std::string& source_id,
                                                int run_index) const {
    return source_dir(source_id) / (run_name(run_index) + ".ndjson");
}

void TrajectoryStore::append_signal(const std::filesystem::path& run_file,
                                    const Signal& signal) const {
    std::filesystem::create_directories(run_file.parent_path());
    std::ofstream out(run_file, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + run_file.string() + " for append");
    const json record{
        {"role", to_string(signal.role)},
        {"step", signal.step},
        {"text", signal.text},
    };
    out << record.dump() << '\n';
    out.flush();
    if (!out.good()) throw std::runtime_error("short write on " + run_file.string());
}

std::vector<Signal> TrajectoryStore::load_signals(const std::filesystem::path& run_file) const {
    std::ifstream in(run_file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + run_file.string());
    std::vector<Signal> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const bool terminated = !in.eof();
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception&) {
            if (!terminated) break;  // interrupted trailing write
            throw std::runtime_error("corrupt record in " + run_file.string());
        }
        Signal s;
        s.role = signal_role_from_string(record.at("role").get<std::string>());
        s.step = record.at("step").get<int>();
        s.text = record.at("text").get<std::string>();
        out.push_back(std::move(s));
    }
    return out;
}

Trajectory TrajectoryStore::load_run(const std::string& source_id, int run_index,
                                     std::uint64_t base_seed) const {
    Trajectory t;
    t.run_id = source_id + "/" + run_name(run_index);
    t.seed = run_seed(base_seed, run_index);
    t.signals = load_signals(run_file(source_id, run_index));
    return t;
}

std::vector<int> TrajectoryStore::existing_runs(const std::string& source_id) const {
    std::vector<int> out;
    const auto dir = source_dir(source_id);
    std::error_code ec;
    if (!std::filesystem::exists(dir, ec) || ec) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("run_", 0) == 0 && entry.path().extension() == ".ndjson") {
            out.push_back(std::stoi(name.substr(4, name.size() - 4 - 7)));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t plan_digest(const ExperimentPlan& plan, const std::string& backend_id) {
    std::ostringstream canon;
    canon << "experiment=" << plan.experiment_id << '\n'
          << "backend=" << backend_id << '\n'
          << "base_seed=" << plan.base_seed << '\n'
          << "n_runs=" << plan.n_runs << '\n'
          << "n_steps=" << plan.chain.n_steps << '\n'
          << "recover=" << (plan.chain.recover ? 1 : 0) << '\n'
          << "temperature=";
    char temp[64];
    std::snprintf(temp, sizeof(temp), "%.10g", plan.chain.temperature);
    canon << temp << '\n'
          << "max_output_tokens="
          << (plan.chain.max_output_tokens ? std::to_string(*plan.chain.max_output_tokens)
                                           : std::string("none"))
          << '\n'
          << "transmit_digest=" << fnv1a64(plan.chain.transmit_instruction) << '\n'
          << "recover_digest=" << fnv1a64(plan.chain.recover_instruction) << '\n';
    for (const auto& [id, text] : plan.sources) {
        canon << "source:" << id << '=' << fnv1a64(text) << '\n';
    }
    return fnv1a64(canon.str());
}

void RunManifest::save(const std::filesystem::path& path) const {
    json sources = json::array();
    for (const auto& [id, digest] : source_digests) {
        sources.push_back(json{{"id", id}, {"digest", digest}});
    }
    const json doc{
        {"experiment_id", experiment_id},
        {"backend_id", backend_id},
        {"config_digest", config_digest},
        {"base_seed", base_seed},
        {"n_runs", n_runs},
        {"n_steps", n_steps},
        {"recover", recover},
        {"sources", sources},
        {"started_at", started_at},
        {"finished_at", finished_at},
        {"run_status", run_status},
    };
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::optional<RunManifest> RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    json doc;
    try {
        in >> doc;
    } catch (const json::exception&) {
        throw std::runtime_error("corrupt manifest: " + path.string());
    }
    RunManifest m;
    m.experiment_id = doc.at("experiment_id").get<std::string>();
    m.backend_id = doc.at("backend_id").get<std::string>();
    m.config_digest = doc.at("config_digest").get<std::uint64_t>();
    m.base_seed = doc.at("base_seed").get<std::uint64_t>();
    m.n_runs = doc.at("n_runs").get<int>();
    m.n_steps = doc.at("n_steps").get<int>();
    m.recover = doc.at("recover").get<bool>();
    for (const auto& s : doc.at("sources")) {
        m.source_digests.emplace_back(s.at("id").get<std::string>(),
                                      s.at("digest").get<std::uint64_t>());
    }
    m.started_at = doc.at("started_at").get<std::string>();
    m.finished_at = doc.at("finished_at").get<std::string>();
    m.run_status = doc.at("run_status").get<std::map<std::string, std::string>>();
    return m;
}

ExecutionReport execute_plan(const ExperimentPlan& plan, Backend& backend,
                             TrajectoryStore& store, const ExecutionOptions& options) {
    if (plan.sources.empty()) throw std::invalid_argument("plan has no sources");
    if (plan.n_runs < 1) throw std::invalid_argument("plan needs n_runs >= 1");

    const std::uint64_t digest = plan_digest(plan, backend.id());

    RunManifest manifest;
    bool had_manifest = false;
    if (auto existing = RunManifest::load(store.manifest_path())) {
        had_manifest = true;
        if (existing->config_digest != digest) {
            throw PlanMismatchError(
                "store at " + store.root().string() +
                " was written under a different configuration (digest mismatch); refusing to resume");
        }
        manifest = std::move(*existing);
    } else {
        manifest.experiment_id = plan.experiment_id;
        manifest.backend_id = backend.id();
        manifest.config_digest = digest;
        manifest.base_seed = plan.base_seed;
        manifest.n_runs = plan.n_runs;
        manifest.n_steps = plan.chain.n_steps;
        manifest.recover = plan.chain.recover;
        for (const auto& [id, text] : plan.sources) {
            manifest.source_digests.emplace_back(id, fnv1a64(text));
        }
        manifest.started_at = utc_now();
    }

    struct Task {
        std::string source_id;
        const std::string* source_text;
        int run_index;
        bool fresh;
    };
    std::vector<Task> todo;
    int skipped = 0;
    for (const auto& [source_id, source_text] : plan.sources) {
        for (int run = 1; run <= plan.n_runs; ++run) {
            std::error_code ec;
            const auto file = store.run_file(source_id, run);
            if (std::filesystem::exists(file, ec) && !ec) {
                Trajectory t = store.load_run(source_id, run, plan.base_seed);
                if (t.complete(plan.chain)) {
                    ++skipped;
                    manifest.run_status[status_key(source_id, run)] = "complete";
                    continue;
                }
                todo.push_back({source_id, &source_text, run, false});
            } else {
                todo.push_back({source_id, &source_text, run, true});
            }
        }
    }

    if (!todo.empty() && had_manifest && !options.resume) {
        throw ResumeRequiredError("store at " + store.root().string() +
                                  " is partially complete; pass resume to continue it");
    }

    int launch_limit = options.max_runs_this_invocation > 0
                           ? options.max_runs_this_invocation
                           : static_cast<int>(todo.size());
    const int attempting = std::min<int>(launch_limit, static_cast<int>(todo.size()));

    ExecutionReport report;
    report.skipped_existing = skipped;
    report.not_attempted = static_cast<int>(todo.size()) - attempting;

    manifest.finished_at.clear();
    manifest.save(store.manifest_path());

    std::atomic<int> cursor{0};
    std::mutex state_mutex;

    auto run_one = [&](const Task& task) {
        const auto file = store.run_file(task.source_id, task.run_index);
        const std::string key = status_key(task.source_id, task.run_index);
        auto observer = [&](const Signal& s) { store.append_signal(file, s); };
        try {
            Trajectory t;
            if (!task.fresh) {
                t = store.load_run(task.source_id, task.run_index, plan.base_seed);
                for (std::size_t i = 0; i < t.signals.size(); ++i) {
                    if (t.signals[i].step != static_cast<int>(i)) {
                        throw std::runtime_error("non-contiguous steps in " + file.string());
                    }
                }
            }
            if (t.signals.empty()) {
                t.run_id = key;
                t.seed = run_seed(plan.base_seed, task.run_index);
                t.backend_id = backend.id();
                t.signals.push_back({0, SignalRole::source, *task.source_text});
                observer(t.signals.back());
            }
            continue_chain(t, plan.chain, backend, observer);
            std::lock_guard<std::mutex> lock(state_mutex);
            manifest.run_status[key] = "complete";
            ++report.completed;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(state_mutex);
            manifest.run_status[key] = "partial";
            report.errors.emplace_back(key, e.what());
            ++report.failed;
        }
    };

    const int workers = std::max(1, std::min(options.workers, attempting));
    if (workers <= 1) {
        for (int i = 0; i < attempting; ++i) run_one(todo[static_cast<std::size_t>(i)]);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (int i = cursor.fetch_add(1); i < attempting; i = cursor.fetch_add(1)) {
                    run_one(todo[static_cast<std::size_t>(i)]);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    if (report.fully_complete()) manifest.finished_at = utc_now();
    manifest.save(store.manifest_path());
    return report;
}

}  // namespace relaylab::chain
