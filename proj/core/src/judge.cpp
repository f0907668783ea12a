#include "relaylab/judge.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace relaylab::judge {

const std::array<std::string, 5> kEmotionLabels = {"Anger", "Anxiety", "Joy", "Hope", "Disgust"};

const std::array<std::string, 5> kValidationDimensions = {
    "applicability", "argument_quality", "concreteness", "clarity", "persuasiveness"};

namespace {

/// Alternation matching the integers lo..hi, longest literals first so "10"
/// wins over "1".
std::string range_alternation(int lo, int hi) {
    std::vector<std::string> values;
    for (int v = lo; v <= hi; ++v) values.push_back(std::to_string(v));
    std::stable_sort(values.begin(), values.end(),
                     [](const std::string& a, const std::string& b) {
                         return a.size() > b.size();
                     });
    std::string out = "(?:";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += '|';
        out += values[i];
    }
    out += ')';
    return out;
}

std::optional<int> extract_labeled_int(const std::string& response, const std::string& label,
                                       int lo, int hi) {
    const std::string pattern =
        label + "\\s*:\\s*(" + range_alternation(lo, hi) + ")(?!\\d)";
    const std::regex re(pattern, std::regex::ECMAScript | std::regex::icase);
    std::smatch m;
    if (!std::regex_search(response, m, re)) return std::nullopt;
    return std::stoi(m[1].str());
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string pair_key(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return a + "-" + b;
}

void warn(const std::string& message) {
    std::fprintf(stderr, "warning: judge: %s\n", message.c_str());
}

}  // namespace

std::optional<JudgeScore> parse_triple(const std::string& response, int lo, int hi) {
    const auto overall = extract_labeled_int(response, "Overall", lo, hi);
    const auto lowest = extract_labeled_int(response, "Lowest", lo, hi);
    const auto highest = extract_labeled_int(response, "Highest", lo, hi);
    if (!overall || !lowest || !highest) return std::nullopt;
    return JudgeScore{*overall, *lowest, *highest};
}

std::optional<int> parse_score(const std::string& response, int lo, int hi) {
    return extract_labeled_int(response, "Score", lo, hi);
}

std::optional<EmotionProfile> parse_emotion_json(const std::string& response) {
    const auto open = response.find('{');
    const auto close = response.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        return std::nullopt;
    }
    json doc;
    try {
        doc = json::parse(response.substr(open, close - open + 1));
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!doc.is_object()) return std::nullopt;
    if (!doc.contains("primary_emotion") || !doc["primary_emotion"].is_string()) {
        return std::nullopt;
    }
    EmotionProfile profile;
    profile.primary = doc["primary_emotion"].get<std::string>();
    if (std::find(kEmotionLabels.begin(), kEmotionLabels.end(), profile.primary) ==
        kEmotionLabels.end()) {
        return std::nullopt;
    }
    if (!doc.contains("intensities") || !doc["intensities"].is_object()) return std::nullopt;
    const auto& intensities = doc["intensities"];
    if (intensities.size() != kEmotionLabels.size()) return std::nullopt;
    for (const auto& label : kEmotionLabels) {
        if (!intensities.contains(label) || !intensities[label].is_number_integer()) {
            return std::nullopt;
        }
        const int v = intensities[label].get<int>();
        if (v < 0 || v > 5) return std::nullopt;
        profile.intensities[label] = v;
    }
    if (!doc.contains("valence") || !doc["valence"].is_number_integer()) return std::nullopt;
    profile.valence = doc["valence"].get<int>();
    if (profile.valence < 1 || profile.valence > 7) return std::nullopt;
    return profile;
}

std::string render_template(const std::string& prompt_template, const std::string& text) {
    const std::string placeholder = "{TEXT}";
    std::string out = prompt_template;
    std::size_t pos = 0;
    while ((pos = out.find(placeholder, pos)) != std::string::npos) {
        out.replace(pos, placeholder.size(), text);
        pos += text.size();
    }
    return out;
}

Judge::Judge(Backend& backend, const BackendDescriptor& descriptor, PromptSet prompts,
             double temperature, RetryPolicy retry, ResponseCache* cache)
    : backend_(backend),
      descriptor_(descriptor),
      prompts_(std::move(prompts)),
      temperature_(temperature),
      retry_(retry),
      cache_(cache) {
    if (retry_.max_attempts < 1) throw std::invalid_argument("retry.max_attempts must be >= 1");
}

std::string Judge::ask(const std::string& prompt_template, const std::string& text,
                       bool bypass_cache) {
    PromptRequest request;
    request.instruction_text = render_template(prompt_template, text);
    request.temperature = temperature_;
    if (cache_ != nullptr && !bypass_cache) {
        return cached_complete(request, backend_, descriptor_, cache_);
    }
    return backend_.complete(request);
}

template <typename T>
std::optional<T> Judge::scored_call(
    const std::string& prompt_template, const std::string& text,
    const std::function<std::optional<T>(const std::string&)>& parse) {
    PromptRequest request;
    request.instruction_text = render_template(prompt_template, text);
    request.temperature = temperature_;

    std::string key;
    if (cache_ != nullptr) {
        key = ResponseCache::key_for(backend_, descriptor_, request);
        if (auto hit = cache_->lookup(key)) {
            ++parse_attempts_;
            if (auto parsed = parse(*hit)) return parsed;
            ++parse_failures_;
        }
    }

    bool any_response = false;
    std::exception_ptr last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(retry_.base_delay * (1LL << (attempt - 2)));
        }
        std::string response;
        try {
            response = backend_.complete(request);
        } catch (const std::exception&) {
            last_error = std::current_exception();
            continue;
        }
        any_response = true;
        ++parse_attempts_;
        if (auto parsed = parse(response)) {
            if (cache_ != nullptr) cache_->store(key, response);
            return parsed;
        }
        ++parse_failures_;
    }
    if (!any_response && last_error) std::rethrow_exception(last_error);
    return std::nullopt;
}

std::optional<JudgeScore> Judge::intensity(const std::string& text) {
    return scored_call<JudgeScore>(prompts_.intensity, text, [](const std::string& r) {
        return parse_triple(r, 1, 7);
    });
}

std::optional<JudgeScore> Judge::valence(const std::string& text) {
    return scored_call<JudgeScore>(prompts_.valence, text, [](const std::string& r) {
        return parse_triple(r, 1, 7);
    });
}

std::optional<int> Judge::assertiveness(const std::string& text) {
    return scored_call<int>(prompts_.assertiveness, text, [](const std::string& r) {
        return parse_score(r, 0, 10);
    });
}

std::optional<int> Judge::framework(const std::string& text) {
    return scored_call<int>(prompts_.framework, text, [](const std::string& r) {
        return parse_score(r, 1, 5);
    });
}

std::optional<int> Judge::advocacy(const std::string& text) {
    return scored_call<int>(prompts_.advocacy, text, [](const std::string& r) {
        return parse_score(r, 1, 5);
    });
}

std::optional<EmotionProfile> Judge::emotion(const std::string& text) {
    return scored_call<EmotionProfile>(prompts_.emotion, text, parse_emotion_json);
}

std::optional<ValidationRun> parse_validation_response(const std::string& response,
                                                       const std::vector<std::string>& order) {
    if (order.size() != 4) throw std::invalid_argument("presentation order must list 4 frames");
    const auto open = response.find('{');
    const auto close = response.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        return std::nullopt;
    }
    json doc;
    try {
        doc = json::parse(response.substr(open, close - open + 1));
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!doc.is_object() || !doc.contains("scores") || !doc.contains("ranking") ||
        !doc.contains("distinct_pairs")) {
        return std::nullopt;
    }

    ValidationRun run;
    const auto& scores = doc["scores"];
    if (!scores.is_object() || scores.size() != 4) return std::nullopt;
    for (std::size_t pos = 1; pos <= 4; ++pos) {
        const std::string key = std::to_string(pos);
        if (!scores.contains(key) || !scores[key].is_object()) return std::nullopt;
        std::map<std::string, int> dims;
        for (const auto& dim : kValidationDimensions) {
            if (!scores[key].contains(dim) || !scores[key][dim].is_number_integer()) {
                return std::nullopt;
            }
            const int v = scores[key][dim].get<int>();
            if (v < 1 || v > 7) return std::nullopt;
            dims[dim] = v;
        }
        run.scores[order[pos - 1]] = std::move(dims);
    }

    const auto& ranking = doc["ranking"];
    if (!ranking.is_array() || ranking.size() != 4) return std::nullopt;
    std::vector<bool> seen(4, false);
    for (const auto& entry : ranking) {
        if (!entry.is_number_integer()) return std::nullopt;
        const int pos = entry.get<int>();
        if (pos < 1 || pos > 4 || seen[static_cast<std::size_t>(pos - 1)]) return std::nullopt;
        seen[static_cast<std::size_t>(pos - 1)] = true;
        run.ranking.push_back(order[static_cast<std::size_t>(pos - 1)]);
    }

    const auto& pairs = doc["distinct_pairs"];
    if (!pairs.is_object()) return std::nullopt;
    for (std::size_t i = 1; i <= 4; ++i) {
        for (std::size_t j = i + 1; j <= 4; ++j) {
            const std::string key = std::to_string(i) + "-" + std::to_string(j);
            if (!pairs.contains(key) || !pairs[key].is_boolean()) return std::nullopt;
            run.pair_distinct[pair_key(order[i - 1], order[j - 1])] = pairs[key].get<bool>();
        }
    }
    return run;
}

FrameValidationReport aggregate_validation(const std::vector<ValidationRun>& runs,
                                           const std::vector<std::string>& frame_ids,
                                           int runs_requested) {
    FrameValidationReport report;
    report.runs_requested = runs_requested;
    report.runs_valid = static_cast<int>(runs.size());
    report.reliable = runs.size() >= 3;

    for (const auto& id : frame_ids) {
        report.borda_points[id] = 0;
        report.mean_rank[id] = 0.0;
    }

    for (const auto& id : frame_ids) {
        for (const auto& dim : kValidationDimensions) {
            std::vector<int> values;
            for (const auto& run : runs) {
                auto fit = run.scores.find(id);
                if (fit == run.scores.end()) continue;
                auto dit = fit->second.find(dim);
                if (dit != fit->second.end()) values.push_back(dit->second);
            }
            if (values.empty()) continue;
            double sum = 0.0;
            for (int v : values) sum += v;
            report.mean_scores[id][dim] = sum / static_cast<double>(values.size());
            std::sort(values.begin(), values.end());
            const std::size_t n = values.size();
            report.median_scores[id][dim] =
                n % 2 == 1 ? values[n / 2]
                           : (values[n / 2 - 1] + values[n / 2]) / 2.0;
        }
    }

    for (const auto& run : runs) {
        for (std::size_t rank = 0; rank < run.ranking.size(); ++rank) {
            const auto& id = run.ranking[rank];
            report.borda_points[id] += static_cast<int>(run.ranking.size() - 1 - rank);
            report.mean_rank[id] += static_cast<double>(rank + 1);
        }
    }
    if (!runs.empty()) {
        for (auto& [id, total] : report.mean_rank) {
            total /= static_cast<double>(runs.size());
        }
    }

    report.consensus_order = frame_ids;
    std::sort(report.consensus_order.begin(), report.consensus_order.end(),
              [&](const std::string& a, const std::string& b) {
                  if (report.borda_points[a] != report.borda_points[b]) {
                      return report.borda_points[a] > report.borda_points[b];
                  }
                  if (report.mean_rank[a] != report.mean_rank[b]) {
                      return report.mean_rank[a] < report.mean_rank[b];
                  }
                  return a < b;
              });

    bool all_pass = !runs.empty();
    for (std::size_t i = 0; i < frame_ids.size(); ++i) {
        for (std::size_t j = i + 1; j < frame_ids.size(); ++j) {
            const std::string key = pair_key(frame_ids[i], frame_ids[j]);
            std::size_t distinct = 0;
            for (const auto& run : runs) {
                auto it = run.pair_distinct.find(key);
                if (it != run.pair_distinct.end() && it->second) ++distinct;
            }
            const double rate = runs.empty()
                                    ? 0.0
                                    : static_cast<double>(distinct) /
                                          static_cast<double>(runs.size());
            report.pair_distinct_rate[key] = rate;
            if (rate < 0.8) all_pass = false;
        }
    }
    report.distinctiveness_pass = all_pass;
    return report;
}

FrameValidationReport validate_frames(const std::vector<FrameCandidate>& frames, Judge& judge,
                                      int n_runs, std::uint64_t seed) {
    if (frames.size() != 4) throw std::invalid_argument("frame validation expects 4 frames");
    if (n_runs < 1) throw std::invalid_argument("n_runs must be >= 1");

    std::vector<std::string> frame_ids;
    for (const auto& f : frames) frame_ids.push_back(f.id);
    std::sort(frame_ids.begin(), frame_ids.end());

    std::mt19937_64 rng(mix64(seed ^ 0x66726d76616cULL));
    std::vector<ValidationRun> valid;
    for (int run = 1; run <= n_runs; ++run) {
        std::vector<std::size_t> order_index(frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) order_index[i] = i;
        std::shuffle(order_index.begin(), order_index.end(), rng);

        std::vector<std::string> order;
        std::ostringstream rendered;
        for (std::size_t pos = 0; pos < order_index.size(); ++pos) {
            const auto& frame = frames[order_index[pos]];
            order.push_back(frame.id);
            rendered << "Frame " << (pos + 1) << ":\n" << frame.text << "\n\n";
        }

        bool parsed_ok = false;
        for (int attempt = 1; attempt <= judge.retry().max_attempts; ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(judge.retry().base_delay * (1LL << (attempt - 2)));
            }
            const std::string response =
                judge.ask(judge.prompts().frame_validation, rendered.str(), true);
            if (auto parsed = parse_validation_response(response, order)) {
                valid.push_back(std::move(*parsed));
                parsed_ok = true;
                break;
            }
        }
        if (!parsed_ok) {
            warn("frame validation run " + std::to_string(run) +
                 " produced no parseable response; excluded");
        }
    }
    return aggregate_validation(valid, frame_ids, n_runs);
}

}  // namespace relaylab::judge
