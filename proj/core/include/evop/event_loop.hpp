#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "evop/common.hpp"
#include "evop/trace.hpp"

namespace evop {

/// Single-threaded discrete-event loop under a virtual clock. Events at the
/// same timestamp run in insertion order, which is what makes whole-scenario
/// replays deterministic.
class EventLoop {
 public:
  using Handler = std::function<void()>;

  explicit EventLoop(TraceSink* trace = nullptr) : trace_(trace) {}

  VirtualTime now() const noexcept { return now_; }

  /// Enqueues a command. Throws PastEvent if `at` precedes the clock.
  void schedule(VirtualTime at, std::string kind, std::string subject,
                std::string detail, Handler handler);

  /// Processes every event with timestamp <= t, then sets the clock to t.
  /// Returns the number of events processed.
  std::size_t run_until(VirtualTime t);

  bool empty() const noexcept { return queue_.empty(); }

 private:
  struct Event {
    VirtualTime at;
    std::uint64_t seq;
    std::string kind;
    std::string subject;
    std::string detail;
    Handler handler;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  VirtualTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  TraceSink* trace_;
};

}  // namespace evop
