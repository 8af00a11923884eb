#pragma once
// Shared plumbing for remote backends: URL splitting and retry with
// exponential backoff.

#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include "seqstory/error.hpp"

namespace seqstory::net {

struct RetryPolicy {
  int max_attempts = 4;  // transport attempts per request
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};
  std::size_t concurrency = 4;  // in-flight requests
};

void sleep_for(std::chrono::milliseconds d);

/// Delay before retry number `retry` (1-based).
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry);

/// Calls fn until it returns without throwing RetryableError or attempts are
/// exhausted (then the last RetryableError propagates). `retries` receives the
/// number of retries performed.
template <typename Fn>
auto call_with_retries(const RetryPolicy& policy, Fn&& fn, int* retries = nullptr)
    -> decltype(fn()) {
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const RetryableError&) {
      if (attempt >= policy.max_attempts) throw;
      if (retries) ++*retries;
      sleep_for(backoff_delay(policy, attempt));
    }
  }
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

/// "http://host:8080/v1/embed" -> {"http://host:8080", "/v1/embed"}.
Endpoint split_url(std::string_view url);

}  // namespace seqstory::net
