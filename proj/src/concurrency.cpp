#include "seqstory/concurrency.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace seqstory {

Gate::Gate(std::size_t limit) : limit_(std::max<std::size_t>(1, limit)) {}

void Gate::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_use_ < limit_; });
  ++in_use_;
}

void Gate::release() {
  {
    std::lock_guard lock(mu_);
    --in_use_;
  }
  cv_.notify_one();
}

std::vector<std::exception_ptr> parallel_for(std::size_t n, std::size_t jobs,
                                             const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
    return errors;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  return errors;
}

void parallel_for_each_or_throw(std::size_t n, std::size_t jobs,
                                const std::function<void(std::size_t)>& fn) {
  for (auto& e : parallel_for(n, jobs, fn)) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace seqstory
