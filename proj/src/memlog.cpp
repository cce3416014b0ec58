#include "otreg/memlog.hpp"

#include <algorithm>

namespace otreg::memlog {

namespace {
thread_local Stats* active = nullptr;
}

void note_alloc(std::size_t bytes) {
  if (active == nullptr) return;
  active->live += bytes;
  active->peak = std::max(active->peak, active->live);
}

void note_free(std::size_t bytes) {
  if (active == nullptr) return;
  active->live -= std::min(active->live, bytes);
}

ScopedTracking::ScopedTracking() : prev_(active) { active = &stats_; }

ScopedTracking::~ScopedTracking() { active = prev_; }

}  // namespace otreg::memlog
