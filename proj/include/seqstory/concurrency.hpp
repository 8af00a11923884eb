#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <vector>

namespace seqstory {

/// Counting gate with a runtime limit.
class Gate {
 public:
  explicit Gate(std::size_t limit);
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t in_use_ = 0;
};

class GateLease {
 public:
  explicit GateLease(Gate* gate) : gate_(gate) {
    if (gate_) gate_->acquire();
  }
  ~GateLease() {
    if (gate_) gate_->release();
  }
  GateLease(const GateLease&) = delete;
  GateLease& operator=(const GateLease&) = delete;

 private:
  Gate* gate_;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index's exception
/// is captured in the returned vector (null on success); no index is skipped
/// because another failed.
std::vector<std::exception_ptr> parallel_for(std::size_t n, std::size_t jobs,
                                             const std::function<void(std::size_t)>& fn);

/// parallel_for that rethrows the lowest-index failure.
void parallel_for_each_or_throw(std::size_t n, std::size_t jobs,
                                const std::function<void(std::size_t)>& fn);

}  // namespace seqstory
