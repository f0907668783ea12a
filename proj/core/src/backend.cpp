#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "relaylab/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "relaylab/text_match.hpp"

using json = nlohmann::json;

namespace relaylab {

namespace {

struct ParsedEndpoint {
    bool https = false;
    std::string host;
    int port = 0;
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    ParsedEndpoint out;
    std::string rest;
    if (endpoint.rfind("https://", 0) == 0) {
        out.https = true;
        rest = endpoint.substr(8);
    } else if (endpoint.rfind("http://", 0) == 0) {
        rest = endpoint.substr(7);
    } else {
        throw std::invalid_argument("endpoint must start with http:// or https://: " + endpoint);
    }
    const auto slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    const auto colon = hostport.find(':');
    if (colon == std::string::npos) {
        out.host = hostport;
        out.port = out.https ? 443 : 80;
    } else {
        out.host = hostport.substr(0, colon);
        out.port = std::stoi(hostport.substr(colon + 1));
    }
    if (out.host.empty()) throw std::invalid_argument("endpoint has no host: " + endpoint);
    return out;
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::http_chat: return "http-chat";
        case BackendKind::echo: return "echo";
        case BackendKind::degrader: return "degrader";
    }
    throw std::logic_error("unknown backend kind");
}

BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "http-chat") return BackendKind::http_chat;
    if (s == "echo") return BackendKind::echo;
    if (s == "degrader") return BackendKind::degrader;
    throw std::invalid_argument("unknown backend kind: " + s);
}

std::string render_prompt(const PromptRequest& request) {
    if (request.payload_text.empty()) return request.instruction_text;
    if (request.instruction_text.empty()) return request.payload_text;
    return request.instruction_text + "\n\n" + request.payload_text;
}

double DegraderConfig::drop_probability(const std::string& unit_id) const {
    auto it = per_unit_drop_probability.find(unit_id);
    return it == per_unit_drop_probability.end() ? default_drop_probability : it->second;
}

std::string EchoBackend::complete(const PromptRequest& request) {
    log_.calls++;
    log_.attempts++;
    return request.payload_text;
}

std::unique_ptr<Backend> EchoBackend::with_seed(std::uint64_t) const {
    return std::make_unique<EchoBackend>();
}

std::vector<SentenceSpan> split_sentences(const std::string& text) {
    std::vector<SentenceSpan> spans;
    std::size_t begin = 0;
    std::size_t i = 0;
    auto is_terminator = [](char c) { return c == '.' || c == '!' || c == '?'; };
    while (i < text.size()) {
        if (is_terminator(text[i])) {
            while (i < text.size() &&
                   (is_terminator(text[i]) || text[i] == '"' || text[i] == '\'')) {
                ++i;
            }
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])) != 0) {
                ++i;
            }
            spans.push_back({begin, i});
            begin = i;
        } else {
            ++i;
        }
    }
    if (begin < text.size()) spans.push_back({begin, text.size()});
    return spans;
}

DegraderBackend::DegraderBackend(DegraderConfig config) : config_(std::move(config)) {
    for (const auto& [id, p] : config_.per_unit_drop_probability) {
        if (p < 0.0 || p > 1.0) {
            throw std::invalid_argument("drop probability outside [0,1] for unit " + id);
        }
    }
    if (config_.default_drop_probability < 0.0 || config_.default_drop_probability > 1.0) {
        throw std::invalid_argument("default drop probability outside [0,1]");
    }
    if (config_.unit_kind == DegraderUnitKind::element_pattern && config_.units.empty()) {
        throw std::invalid_argument("element-pattern degrader needs a unit list");
    }
}

std::string DegraderBackend::complete(const PromptRequest& request) {
    log_.calls++;
    log_.attempts++;
    const std::string& payload = request.payload_text;

    std::mt19937_64 rng(mix64(config_.seed) ^ fnv1a64(payload));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<text::CharSpan> dropped;
    if (config_.unit_kind == DegraderUnitKind::sentence) {
        const auto sentences = split_sentences(payload);
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            const double u = uniform(rng);
            const double p = config_.drop_probability("s" + std::to_string(i));
            if (u < p) dropped.push_back({sentences[i].begin, sentences[i].end});
        }
    } else {
        const auto tokens = text::tokenize(payload);
        for (const auto& unit : config_.units) {
            const double u = uniform(rng);
            const double p = config_.drop_probability(unit.id);
            if (u >= p) continue;
            for (const auto& pattern : unit.patterns) {
                for (const auto& span : text::find_phrase(tokens, text::compile_phrase(pattern))) {
                    dropped.push_back({tokens[span.first].begin, tokens[span.last].end});
                }
            }
        }
    }
    return text::delete_spans(payload, std::move(dropped));
}

std::string DegraderBackend::id() const {
    return "degrader:" + std::string(config_.unit_kind == DegraderUnitKind::sentence
                                         ? "sentence"
                                         : "element-pattern");
}

std::string DegraderBackend::cache_salt() const {
    return "seed=" + std::to_string(config_.seed);
}

std::unique_ptr<Backend> DegraderBackend::with_seed(std::uint64_t seed) const {
    DegraderConfig reseeded = config_;
    reseeded.seed = seed;
    return std::make_unique<DegraderBackend>(std::move(reseeded));
}

HttpChatBackend::HttpChatBackend(BackendDescriptor descriptor)
    : descriptor_(std::move(descriptor)) {
    if (descriptor_.endpoint.empty()) throw std::invalid_argument("http-chat needs an endpoint");
    if (descriptor_.retry.max_attempts < 1) {
        throw std::invalid_argument("retry.max_attempts must be >= 1");
    }
    if (!descriptor_.api_key_env.empty()) {
        if (const char* key = std::getenv(descriptor_.api_key_env.c_str())) api_key_ = key;
    }
}

std::string HttpChatBackend::extract_first_candidate(const std::string& body) {
    const json parsed = json::parse(body);
    if (parsed.contains("choices") && parsed["choices"].is_array() &&
        !parsed["choices"].empty()) {
        const auto& first = parsed["choices"][0];
        if (first.contains("message") && first["message"].contains("content")) {
            return first["message"]["content"].get<std::string>();
        }
        if (first.contains("text")) return first["text"].get<std::string>();
    }
    if (parsed.contains("candidates") && parsed["candidates"].is_array() &&
        !parsed["candidates"].empty()) {
        const auto& content = parsed["candidates"][0]["content"];
        if (content.contains("parts") && content["parts"].is_array()) {
            std::string joined;
            for (const auto& part : content["parts"]) {
                if (part.contains("text")) joined += part["text"].get<std::string>();
            }
            return joined;
        }
    }
    throw ProtocolError(0, "response has no candidate text");
}

std::string HttpChatBackend::complete(const PromptRequest& request) {
    log_.calls++;
    const auto ep = parse_endpoint(descriptor_.endpoint);

    json body{
        {"model", descriptor_.model_id},
        {"temperature", request.temperature},
        {"messages", json::array({json{{"role", "user"}, {"content", render_prompt(request)}}})},
    };
    if (request.max_output_tokens.has_value()) body["max_tokens"] = *request.max_output_tokens;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 1; attempt <= descriptor_.retry.max_attempts; ++attempt) {
        log_.attempts++;
        if (attempt > 1) {
            log_.retries++;
            const auto delay = descriptor_.retry.base_delay * (1LL << (attempt - 2));
            std::this_thread::sleep_for(delay);
        }

        httplib::Result res;
        if (ep.https) {
            httplib::SSLClient client(ep.host, ep.port);
            client.set_read_timeout(120, 0);
            client.set_connection_timeout(20, 0);
            res = client.Post(ep.path, headers, payload, "application/json");
        } else {
            httplib::Client client(ep.host, ep.port);
            client.set_read_timeout(120, 0);
            client.set_connection_timeout(20, 0);
            res = client.Post(ep.path, headers, payload, "application/json");
        }

        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "retryable status " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProtocolError(res->status,
                                "http-chat request failed with status " +
                                    std::to_string(res->status) + ": " + res->body);
        }
        std::string text;
        try {
            text = extract_first_candidate(res->body);
        } catch (const json::exception& e) {
            throw ProtocolError(res->status, std::string("malformed response body: ") + e.what());
        }
        if (is_blank(text)) {
            last_error = "blank model output";
            continue;
        }
        return text;
    }
    if (last_error == "blank model output") {
        throw EmptyOutputError("model returned empty or blank output after " +
                               std::to_string(descriptor_.retry.max_attempts) + " attempts");
    }
    throw TransportError("http-chat exhausted " + std::to_string(descriptor_.retry.max_attempts) +
                         " attempts: " + last_error);
}

std::string HttpChatBackend::id() const {
    return "http-chat:" + descriptor_.model_id;
}

std::unique_ptr<Backend> HttpChatBackend::with_seed(std::uint64_t) const {
    return std::make_unique<HttpChatBackend>(descriptor_);
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor) {
    switch (descriptor.kind) {
        case BackendKind::echo: return std::make_unique<EchoBackend>();
        case BackendKind::degrader: return std::make_unique<DegraderBackend>(descriptor.degrader);
        case BackendKind::http_chat: return std::make_unique<HttpChatBackend>(descriptor);
    }
    throw std::logic_error("unknown backend kind");
}

}  // namespace relaylab
