#pragma once

#include <cstddef>

namespace otreg::memlog {

/// Working-set bookkeeping for the solver hot paths. The solvers note their
/// principal buffer allocations here; unless a tracker is installed on the
/// current thread every call is a no-op. Used by the bench tool to measure
/// peak working set as a function of problem size.
struct Stats {
  std::size_t live = 0;
  std::size_t peak = 0;
};

void note_alloc(std::size_t bytes);
void note_free(std::size_t bytes);

class ScopedTracking {
 public:
  ScopedTracking();
  ~ScopedTracking();
  ScopedTracking(const ScopedTracking&) = delete;
  ScopedTracking& operator=(const ScopedTracking&) = delete;

  const Stats& stats() const { return stats_; }

 private:
  Stats stats_;
  Stats* prev_;
};

/// RAII note spanning a buffer's lifetime.
struct NotedBytes {
  explicit NotedBytes(std::size_t bytes) : bytes_(bytes) { note_alloc(bytes_); }
  ~NotedBytes() { note_free(bytes_); }
  NotedBytes(const NotedBytes&) = delete;
  NotedBytes& operator=(const NotedBytes&) = delete;

 private:
  std::size_t bytes_;
};

}  // namespace otreg::memlog
