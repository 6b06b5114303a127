#include "sim/simulator.hpp"

#include <string>

namespace sim {

EventId Simulator::schedule(Seconds at, std::function<void()> fn) {
  if (at < now_)
    throw PastTime("event at " + std::to_string(at) + " is before now " +
                   std::to_string(now_));
  const EventId id = next_seq_++;
  queue_.push(Entry{at, id});
  handlers_.emplace(id, std::move(fn));
  return id;
}

void Simulator::run_until(Seconds t_end) {
  if (t_end < now_)
    throw PastTime("run_until " + std::to_string(t_end) +
                   " is before now " + std::to_string(now_));
  while (!queue_.empty() && queue_.top().at <= t_end) {
    const Entry entry = queue_.top();
    queue_.pop();
    auto it = handlers_.find(entry.seq);
    if (it == handlers_.end()) continue;
    std::function<void()> fn = std::move(it->second);
    handlers_.erase(it);
    now_ = entry.at;
    ++dispatched_;
    fn();
  }
  now_ = t_end;
}

}  // namespace sim
