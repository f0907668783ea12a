#include "relaylab/rate_limiter.hpp"

#include <thread>

namespace relaylab {

RateLimiter::RateLimiter(double requests_per_second)
    : rate_(requests_per_second), next_slot_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_ <= 0.0) return;
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / rate_));
    std::chrono::steady_clock::time_point my_slot;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        if (next_slot_ < now) next_slot_ = now;
        my_slot = next_slot_;
        next_slot_ += interval;
    }
    std::this_thread::sleep_until(my_slot);
}

ThrottledBackend::ThrottledBackend(std::shared_ptr<Backend> inner,
                                   std::shared_ptr<RateLimiter> limiter)
    : inner_(std::move(inner)), limiter_(std::move(limiter)) {}

std::string ThrottledBackend::complete(const PromptRequest& request) {
    if (limiter_) limiter_->acquire();
    return inner_->complete(request);
}

std::unique_ptr<Backend> ThrottledBackend::with_seed(std::uint64_t seed) const {
    auto reseeded = inner_->with_seed(seed);
    return std::make_unique<ThrottledBackend>(std::shared_ptr<Backend>(std::move(reseeded)),
                                              limiter_);
}

}  // namespace relaylab
