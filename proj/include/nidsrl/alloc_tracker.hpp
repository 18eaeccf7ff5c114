#pragma once

#include <atomic>
#include <cstdint>
#include <string>

namespace nidsrl::heap {

// Live-heap counters. They only move when nidsrl/alloc_hooks.hpp is compiled
// into the program (exactly one translation unit); otherwise they stay zero
// and callers fall back to analytic residency estimates.
struct Counters {
  std::atomic<std::int64_t> live{0};
  std::atomic<std::int64_t> peak{0};
  std::atomic<std::uint64_t> calls{0};
};

inline constinit Counters g_counters{};

inline void on_alloc(std::int64_t n) {
  g_counters.calls.fetch_add(1, std::memory_order_relaxed);
  const std::int64_t now = g_counters.live.fetch_add(n, std::memory_order_relaxed) + n;
  std::int64_t p = g_counters.peak.load(std::memory_order_relaxed);
  while (now > p && !g_counters.peak.compare_exchange_weak(p, now, std::memory_order_relaxed)) {
  }
}

inline void on_free(std::int64_t n) { g_counters.live.fetch_sub(n, std::memory_order_relaxed); }

inline bool tracking() { return g_counters.calls.load(std::memory_order_relaxed) > 0; }

inline std::int64_t live_bytes() { return g_counters.live.load(std::memory_order_relaxed); }

inline const char* method_name() {
  return tracking() ? "heap accounting (malloc interposition), peak live bytes above scope entry"
                    : "analytic residency estimate (heap hooks not linked)";
}

/// Peak heap growth between construction and `peak_bytes()`. Resets the
/// process-wide high-water mark, so scopes must not overlap across threads.
class Scope {
 public:
  Scope() : base_(live_bytes()) { g_counters.peak.store(base_, std::memory_order_relaxed); }

  std::int64_t peak_bytes() const {
    const std::int64_t p = g_counters.peak.load(std::memory_order_relaxed) - base_;
    return p > 0 ? p : 0;
  }

 private:
  std::int64_t base_;
};

}  // namespace nidsrl::heap
