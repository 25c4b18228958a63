#include "evop/event_loop.hpp"

#include <utility>

namespace evop {

void EventLoop::schedule(VirtualTime at, std::string kind, std::string subject,
                         std::string detail, Handler handler) {
  if (at < now_) {
    raise(ErrorCode::PastEvent, kind + " at t=" + std::to_string(at) +
                                    " but clock is t=" + std::to_string(now_));
  }
  queue_.push(Event{at, next_seq_++, std::move(kind), std::move(subject),
                    std::move(detail), std::move(handler)});
}

std::size_t EventLoop::run_until(VirtualTime t) {
  if (t < now_) {
    raise(ErrorCode::PastEvent, "run_until(" + std::to_string(t) +
                                    ") but clock is t=" + std::to_string(now_));
  }
  std::size_t processed = 0;
  while (!queue_.empty() && queue_.top().at <= t) {
    // Copy out before pop: the handler may schedule new events.
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.at;
    if (trace_) {
      trace_->emit(ev.at, ev.kind, ev.subject, ev.detail);
    }
    ev.handler();
    ++processed;
  }
  now_ = t;
  return processed;
}

}  // namespace evop
