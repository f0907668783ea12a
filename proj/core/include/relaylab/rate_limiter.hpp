#pragma once

#include <chrono>
#include <memory>
#include <mutex>

#include "relaylab/backend.hpp"

namespace relaylab {

/// Serializes callers to at most `requests_per_second` acquisitions, shared
/// across threads. A non-positive rate disables limiting.
class RateLimiter {
   public:
    explicit RateLimiter(double requests_per_second);

    void acquire();

    double rate() const { return rate_; }

   private:
    double rate_;
    std::chrono::steady_clock::time_point next_slot_;
    std::mutex mutex_;
};

/// Backend decorator that waits on a shared RateLimiter before each call.
class ThrottledBackend final : public Backend {
   public:
    ThrottledBackend(std::shared_ptr<Backend> inner, std::shared_ptr<RateLimiter> limiter);

    std::string complete(const PromptRequest& request) override;
    std::string id() const override { return inner_->id(); }
    std::string cache_salt() const override { return inner_->cache_salt(); }
    std::unique_ptr<Backend> with_seed(std::uint64_t seed) const override;

   private:
    std::shared_ptr<Backend> inner_;
    std::shared_ptr<RateLimiter> limiter_;
};

}  // namespace relaylab
