#pragma once
// Exponential-backoff retry for transient transport failures. Only
// TransportError is retried; a well-formed but wrong reply (ProtocolError)
// is definitive and surfaces immediately.

#include <chrono>
#include <thread>
#include <utility>

#include "glassvqa/errors.hpp"

namespace glassvqa {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_delay{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_delay{10000};
};

template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    auto delay = policy.initial_delay;
    int attempts = policy.max_attempts < 1 ? 1 : policy.max_attempts;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError&) {
            if (attempt >= attempts) throw;
            std::this_thread::sleep_for(delay);
            auto next = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
            delay = next > policy.max_delay ? policy.max_delay : next;
        }
    }
}

}  // namespace glassvqa
