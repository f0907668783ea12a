#include "relaylab/response_cache.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace relaylab {

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void warn(const std::string& message) {
    std::fprintf(stderr, "warning: response cache: %s\n", message.c_str());
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) warn("cannot create " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::key_for(const Backend& backend, const BackendDescriptor& descriptor,
                                   const PromptRequest& request) {
    std::ostringstream material;
    material << to_string(descriptor.kind) << '\x1f' << descriptor.model_id << '\x1f'
             << backend.cache_salt() << '\x1f' << request.instruction_text << '\x1f'
             << request.payload_text << '\x1f';
    char temp[64];
    std::snprintf(temp, sizeof(temp), "%.10g", request.temperature);
    material << temp;
    const std::string s = material.str();
    // Two passes with different offset bases; 128 bits of key material keeps
    // accidental collisions out of reach at this scale.
    return hex64(fnv1a64(s)) + hex64(fnv1a64(s, 0xcbf29ce484222325ULL ^ 0x9e3779b97f4a7c15ULL));
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto path = dir_ / (key + ".txt");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec) || ec) return std::nullopt;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        warn("cannot read " + path.string());
        return std::nullopt;
    }
    std::ostringstream body;
    body << in.rdbuf();
    if (!in.good() && !in.eof()) {
        warn("short read on " + path.string());
        return std::nullopt;
    }
    return body.str();
}

void ResponseCache::store(const std::string& key, const std::string& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto path = dir_ / (key + ".txt");
    const auto tmp = dir_ / (key + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            warn("cannot write " + tmp.string());
            return;
        }
        out << response;
        if (!out.good()) {
            warn("short write on " + tmp.string());
            return;
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) warn("cannot publish " + path.string() + ": " + ec.message());
}

std::string cached_complete(const PromptRequest& request, Backend& backend,
                            const BackendDescriptor& descriptor, ResponseCache* cache) {
    if (cache == nullptr) return backend.complete(request);
    const std::string key = ResponseCache::key_for(backend, descriptor, request);
    if (auto hit = cache->lookup(key)) return *hit;
    std::string response = backend.complete(request);
    cache->store(key, response);
    return response;
}

}  // namespace relaylab
