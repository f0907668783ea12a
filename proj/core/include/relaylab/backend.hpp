#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace relaylab {

/// Retry schedule for transient failures. Delays grow geometrically from
/// base_delay, so the sequence is nondecreasing.
struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{250};
};

enum class BackendKind { http_chat, echo, degrader };

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

/// How a degrader splits its input into droppable units.
enum class DegraderUnitKind { sentence, element_pattern };

struct DegraderUnit {
    std::string id;
    std::vector<std::string> patterns;
};

struct DegraderConfig {
    DegraderUnitKind unit_kind = DegraderUnitKind::sentence;
    std::vector<DegraderUnit> units;
    double default_drop_probability = 0.0;
    std::map<std::string, double> per_unit_drop_probability;
    std::uint64_t seed = 0;

    double drop_probability(const std::string& unit_id) const;
};

struct BackendDescriptor {
    BackendKind kind = BackendKind::echo;
    std::string endpoint;
    std::string model_id;
    double default_temperature = 1.0;
    RetryPolicy retry;
    /// Name of the environment variable holding the API key. The key itself
    /// never appears in configuration files.
    std::string api_key_env = "RELAYLAB_API_KEY";
    DegraderConfig degrader;
};

/// One model call. The full prompt is instruction_text, a blank line, then
/// payload_text; nothing else is added. payload_text is empty only for
/// single-block prompts (judge rubrics) and degenerate tests.
struct PromptRequest {
    std::string instruction_text;
    std::string payload_text;
    double temperature = 1.0;
    std::optional<int> max_output_tokens;
};

std::string render_prompt(const PromptRequest& request);

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
    ProtocolError(int status_code, const std::string& what)
        : std::runtime_error(what), status(status_code) {}
    int status = 0;
};

struct EmptyOutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Attempt accounting across a backend's lifetime.
struct CallLog {
    std::atomic<std::uint64_t> calls{0};
    std::atomic<std::uint64_t> attempts{0};
    std::atomic<std::uint64_t> retries{0};
};

/// A stateless completion endpoint. Every call is independent; no
/// conversation state is carried between calls.
class Backend {
   public:
    virtual ~Backend() = default;

    virtual std::string complete(const PromptRequest& request) = 0;

    /// Identifier recorded in manifests and logs.
    virtual std::string id() const = 0;

    /// Extra material folded into response-cache keys so that backends whose
    /// output depends on more than (kind, model, prompt, temperature) do not
    /// collide. Seeded backends return a seed-derived salt.
    virtual std::string cache_salt() const { return {}; }

    /// A clone of this backend bound to the given seed. Deterministic
    /// backends use the seed to derive their random draws; others return a
    /// plain copy.
    virtual std::unique_ptr<Backend> with_seed(std::uint64_t seed) const = 0;

    const CallLog& call_log() const { return log_; }

   protected:
    CallLog log_;
};

/// Returns the payload verbatim.
class EchoBackend final : public Backend {
   public:
    std::string complete(const PromptRequest& request) override;
    std::string id() const override { return "echo"; }
    std::unique_ptr<Backend> with_seed(std::uint64_t) const override;
};

/// Deletes units of the payload independently with configured probabilities.
/// The random draws for a call are derived from (seed, payload), so identical
/// inputs under the same seed always produce identical output, and raising a
/// drop probability can only remove more under the same seed.
class DegraderBackend final : public Backend {
   public:
    explicit DegraderBackend(DegraderConfig config);

    std::string complete(const PromptRequest& request) override;
    std::string id() const override;
    std::string cache_salt() const override;
    std::unique_ptr<Backend> with_seed(std::uint64_t seed) const override;

    const DegraderConfig& config() const { return config_; }

   private:
    DegraderConfig config_;
};

/// JSON chat endpoint speaking a role-tagged message list. The prompt goes
/// out as a single user message; the reply is the first candidate's text.
/// Transient failures are retried per the descriptor's RetryPolicy with
/// exponential backoff.
class HttpChatBackend final : public Backend {
   public:
    explicit HttpChatBackend(BackendDescriptor descriptor);

    std::string complete(const PromptRequest& request) override;
    std::string id() const override;
    std::unique_ptr<Backend> with_seed(std::uint64_t) const override;

    const BackendDescriptor& descriptor() const { return descriptor_; }

    /// Extracts the reply text from a response body. Exposed for tests.
    static std::string extract_first_candidate(const std::string& body);

   private:
    BackendDescriptor descriptor_;
    std::string api_key_;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor);

/// Splits text into sentence spans covering the whole string (terminator and
/// trailing whitespace included), used by the sentence-unit degrader.
struct SentenceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};
std::vector<SentenceSpan> split_sentences(const std::string& text);

/// FNV-1a 64-bit hash, the project's stable non-cryptographic digest.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace relaylab
