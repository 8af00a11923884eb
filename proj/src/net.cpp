#include "seqstory/net.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

namespace seqstory::net {

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry) {
  const double scaled = static_cast<double>(policy.initial_backoff.count()) *
                        std::pow(policy.multiplier, std::max(0, retry - 1));
  const double capped = std::min(scaled, static_cast<double>(policy.max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

void sleep_for(std::chrono::milliseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

Endpoint split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw ValidationError(fmt::format("URL '{}' has no scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

}  // namespace seqstory::net
