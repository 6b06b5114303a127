#include "sim/link.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sim {

Link::Link(LinkId id, const LinkConfig& config, std::uint64_t master_seed)
    : id_(id), config_(config), rng_(master_seed, id) {
  if (!(config_.bandwidth_bps > 0.0))
    throw std::invalid_argument("link bandwidth must be positive");
  if (config_.prop_delay < 0.0)
    throw std::invalid_argument("link delay must be non-negative");
  if (config_.queue_limit == 0)
    throw std::invalid_argument("link queue_limit must be at least 1");
  if (!(config_.loss_prob >= 0.0 && config_.loss_prob <= 1.0))
    throw std::invalid_argument("link loss_prob must be in [0,1]");
}

std::size_t Link::queue_length(Seconds now) {
  while (!departures_.empty() && departures_.front() <= now)
    departures_.pop_front();
  return departures_.size();
}

void Link::set_bandwidth(double bps) {
  if (!(bps > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  config_.bandwidth_bps = bps;
}

void Link::set_loss_prob(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("loss_prob must be in [0,1]");
  config_.loss_prob = p;
}

Link::Admission Link::enqueue(Packet& pkt, Seconds now) {
  if (pkt.kind == PacketKind::Data && pkt.len > config_.mtu)
    throw std::invalid_argument("data packet of " + std::to_string(pkt.len) +
                                " bytes exceeds link mtu " +
                                std::to_string(config_.mtu));
  if (queue_length(now) >= config_.queue_limit) return {};

  EnqueueResult result = EnqueueResult::Queued;
  if (rng_.bernoulli(config_.loss_prob)) {
    if (!config_.ecn) return {};
    pkt.ecn_marked = true;
    result = EnqueueResult::Marked;
  }

  const Seconds start = std::max(now, last_departure_);
  const Seconds departure =
      start + static_cast<double>(pkt.len) * 8.0 / config_.bandwidth_bps;
  last_departure_ = departure;
  departures_.push_back(departure);
  return Admission{result, departure + config_.prop_delay};
}

}  // namespace sim
