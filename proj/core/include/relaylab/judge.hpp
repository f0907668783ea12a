#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relaylab/backend.hpp"
#include "relaylab/response_cache.hpp"

namespace relaylab::judge {

/// Overall/Lowest/Highest ratings parsed from a rubric response. No ordering
/// among the three is assumed or enforced.
struct JudgeScore {
    int overall = 0;
    int lowest = 0;
    int highest = 0;
};

/// Extracts "Overall:", "Lowest:" and "Highest:" integers (labels matched
/// case-insensitively, values constrained to [lo, hi] in the pattern itself).
/// Any missing or out-of-range field makes the whole parse fail.
std::optional<JudgeScore> parse_triple(const std::string& response, int lo, int hi);

/// Extracts a single "Score:" integer in [lo, hi].
std::optional<int> parse_score(const std::string& response, int lo, int hi);

extern const std::array<std::string, 5> kEmotionLabels;  // Anger Anxiety Joy Hope Disgust

/// A structured emotion read: primary label, per-emotion intensities 0-5 (all
/// five present), and valence 1-7.
struct EmotionProfile {
    std::string primary;
    std::map<std::string, int> intensities;
    int valence = 0;
};

/// Parses the first JSON object in the response and validates it against the
/// schema above. Code fences around the JSON are tolerated.
std::optional<EmotionProfile> parse_emotion_json(const std::string& response);

/// Renders a prompt template by substituting {TEXT}.
std::string render_template(const std::string& prompt_template, const std::string& text);

struct JudgeConfig {
    BackendDescriptor backend;
    double temperature = 0.1;
    RetryPolicy retry;
};

/// Names of the prompt templates a Judge needs, mapped to their text.
struct PromptSet {
    std::string intensity;
    std::string valence;
    std::string assertiveness;
    std::string framework;
    std::string advocacy;
    std::string emotion;
    std::string frame_validation;
};

/// Wraps a backend with the rubric prompts. Each scoring call renders the
/// template, asks the backend, and parses; unparseable output is retried with
/// exponential backoff up to retry.max_attempts and then recorded as a
/// missing value, never fabricated. Only parse-valid responses enter the
/// cache, and retries after a parse failure bypass it.
class Judge {
   public:
    Judge(Backend& backend, const BackendDescriptor& descriptor, PromptSet prompts,
          double temperature = 0.1, RetryPolicy retry = {}, ResponseCache* cache = nullptr);

    std::optional<JudgeScore> intensity(const std::string& text);
    std::optional<JudgeScore> valence(const std::string& text);
    std::optional<int> assertiveness(const std::string& text);  ///< 0-10
    std::optional<int> framework(const std::string& text);      ///< 1-5
    std::optional<int> advocacy(const std::string& text);       ///< 1-5
    std::optional<EmotionProfile> emotion(const std::string& text);

    /// Raw call with template substitution, used by frame validation.
    std::string ask(const std::string& prompt_template, const std::string& text,
                    bool bypass_cache = false);

    std::uint64_t parse_attempts() const { return parse_attempts_; }
    std::uint64_t parse_failures() const { return parse_failures_; }

    const PromptSet& prompts() const { return prompts_; }
    RetryPolicy retry() const { return retry_; }

   private:
    template <typename T>
    std::optional<T> scored_call(const std::string& prompt_template, const std::string& text,
                                 const std::function<std::optional<T>(const std::string&)>& parse);

    Backend& backend_;
    BackendDescriptor descriptor_;
    PromptSet prompts_;
    double temperature_;
    RetryPolicy retry_;
    ResponseCache* cache_;
    std::uint64_t parse_attempts_ = 0;
    std::uint64_t parse_failures_ = 0;
};

/// A frame presented for validation: id (A-D), display name, stimulus text.
struct FrameCandidate {
    std::string id;
    std::string name;
    std::string text;
};

extern const std::array<std::string, 5> kValidationDimensions;

/// One successfully parsed validation run, already mapped from presentation
/// positions back to frame ids.
struct ValidationRun {
    std::map<std::string, std::map<std::string, int>> scores;  ///< frame -> dim -> 1-7
    std::vector<std::string> ranking;                          ///< frame ids, best first
    std::map<std::string, bool> pair_distinct;                 ///< "A-B" -> distinct?
};

std::optional<ValidationRun> parse_validation_response(const std::string& response,
                                                       const std::vector<std::string>& order);

struct FrameValidationReport {
    int runs_requested = 0;
    int runs_valid = 0;
    bool reliable = false;  ///< at least 3 valid runs
    std::map<std::string, std::map<std::string, double>> mean_scores;
    std::map<std::string, std::map<std::string, double>> median_scores;
    std::map<std::string, int> borda_points;
    std::map<std::string, double> mean_rank;
    std::vector<std::string> consensus_order;  ///< frame ids, best first
    std::map<std::string, double> pair_distinct_rate;
    bool distinctiveness_pass = false;  ///< every pair distinct in >= 80% of valid runs
};

/// Aggregates parsed runs: Borda points (rank 1 scores 3 ... rank 4 scores 0),
/// ties broken by mean rank then lexical id, pairwise distinctiveness rates
/// against the 0.8 threshold.
FrameValidationReport aggregate_validation(const std::vector<ValidationRun>& runs,
                                           const std::vector<std::string>& frame_ids,
                                           int runs_requested);

/// Runs the whole protocol: n_runs judge calls with seeded random
/// presentation order, parse, aggregate. Malformed runs are dropped with a
/// warning; fewer than 3 valid runs marks the report unreliable.
FrameValidationReport validate_frames(const std::vector<FrameCandidate>& frames, Judge& judge,
                                      int n_runs = 5, std::uint64_t seed = 0);

}  // namespace relaylab::judge
