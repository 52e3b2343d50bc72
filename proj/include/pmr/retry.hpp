#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>

#include "pmr/error.hpp"

namespace pmr {

/// Exponential backoff for retryable (NetworkError-derived) failures.
struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
};

template <typename F>
auto with_retry(const RetryPolicy& policy, F&& fn) -> decltype(fn()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const NetworkError&) {
            if (attempt >= policy.max_attempts) throw;
            if (policy.sleep) policy.sleep(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
        }
    }
}

/// Token bucket shared by every session talking to one remote service.
/// Refills at `per_second` tokens per second up to `burst`.
class RateLimiter {
public:
    using Clock = std::chrono::steady_clock;

    explicit RateLimiter(double per_second, double burst = 1.0)
        : rate_(per_second), burst_(burst), tokens_(burst), last_(Clock::now()) {}

    /// Blocks until a token is available, then consumes it.
    void acquire() {
        std::unique_lock lock(mu_);
        while (true) {
            refill();
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
            cv_.wait_for(lock, std::chrono::duration_cast<Clock::duration>(wait));
        }
    }

    double rate() const { return rate_; }

private:
    void refill() {
        auto now = Clock::now();
        std::chrono::duration<double> elapsed = now - last_;
        last_ = now;
        tokens_ = std::min(burst_, tokens_ + elapsed.count() * rate_);
    }

    std::mutex mu_;
    std::condition_variable cv_;
    double rate_;
    double burst_;
    double tokens_;
    Clock::time_point last_;
};

}  // namespace pmr
