#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "relaylab/backend.hpp"

namespace relaylab {

/// Content-addressed response store: one text file per completed call, keyed
/// by a stable hash of (backend kind, model id, backend salt, instruction,
/// payload, temperature). I/O failures degrade to uncached calls with a
/// warning on stderr; they never fail the experiment.
class ResponseCache {
   public:
    explicit ResponseCache(std::filesystem::path dir);

    static std::string key_for(const Backend& backend, const BackendDescriptor& descriptor,
                               const PromptRequest& request);

    std::optional<std::string> lookup(const std::string& key) const;
    void store(const std::string& key, const std::string& response);

    const std::filesystem::path& dir() const { return dir_; }

   private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

/// Consults the cache before calling the backend and stores the response on
/// success. A null cache is a plain call.
std::string cached_complete(const PromptRequest& request, Backend& backend,
                            const BackendDescriptor& descriptor, ResponseCache* cache);

}  // namespace relaylab
