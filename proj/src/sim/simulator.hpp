#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace sim {

using Seconds = double;
using EventId = std::uint64_t;

class PastTime : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Virtual-time event loop. Events fire in nondecreasing time; events at the
/// same instant fire in the order they were scheduled.
class Simulator {
 public:
  Seconds now() const { return now_; }

  EventId schedule(Seconds at, std::function<void()> fn);
  EventId schedule_in(Seconds delay, std::function<void()> fn) {
    return schedule(now_ + delay, std::move(fn));
  }
  /// Cancelling an event that already fired (or was cancelled) is a no-op.
  void cancel(EventId id) { handlers_.erase(id); }
  bool is_pending(EventId id) const { return handlers_.contains(id); }

  /// Fires every event with time <= t_end, then advances the clock to t_end.
  void run_until(Seconds t_end);
  std::size_t pending_events() const { return handlers_.size(); }
  std::uint64_t dispatched_events() const { return dispatched_; }

 private:
  struct Entry {
    Seconds at;
    EventId seq;
    bool operator>(const Entry& o) const {
      return at != o.at ? at > o.at : seq > o.seq;
    }
  };

  Seconds now_ = 0.0;
  EventId next_seq_ = 1;
  std::uint64_t dispatched_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
  std::unordered_map<EventId, std::function<void()>> handlers_;
};

}  // namespace sim
