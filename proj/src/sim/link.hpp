#pragma once

#include <cstdint>
#include <deque>

#include "sim/packet.hpp"
#include "sim/rng.hpp"
#include "sim/simulator.hpp"

namespace sim {

using LinkId = std::uint32_t;

struct LinkConfig {
  double bandwidth_bps = 10e6;
  Seconds prop_delay = 0.030;
  std::size_t queue_limit = 50;  // packets, including the one in service
  double loss_prob = 0.0;
  bool ecn = false;
  std::uint32_t mtu = 1500;
};

enum class EnqueueResult : std::uint8_t { Queued, Dropped, Marked };

/// Dummynet-style pipe: drop-tail FIFO, fixed serialization rate, constant
/// propagation delay and i.i.d. Bernoulli loss. In ECN mode the random loss
/// marks instead of dropping; queue overflow always drops.
class Link {
 public:
  Link(LinkId id, const LinkConfig& config, std::uint64_t master_seed);

  struct Admission {
    EnqueueResult result = EnqueueResult::Dropped;
    Seconds delivery_time = 0.0;
  };

  /// Admits or drops `pkt` arriving at `now`. Sets pkt.ecn_marked when the
  /// packet is marked. Throws std::invalid_argument for oversized data.
  Admission enqueue(Packet& pkt, Seconds now);

  std::size_t queue_length(Seconds now);
  void set_bandwidth(double bps);
  void set_loss_prob(double p);

  LinkId id() const { return id_; }
  const LinkConfig& config() const { return config_; }

 private:
  LinkId id_;
  LinkConfig config_;
  Rng rng_;
  std::deque<Seconds> departures_;
  Seconds last_departure_ = 0.0;
};

}  // namespace sim
