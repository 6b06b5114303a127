#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "sim/link.hpp"
#include "sim/simulator.hpp"
#include "sim/trace.hpp"

namespace sim {

using EndpointId = std::uint32_t;
using RouteId = std::uint32_t;
using PacketHandler = std::function<void(const Packet&)>;

struct FlowStats {
  std::uint64_t injected_bytes = 0;
  std::uint64_t delivered_bytes = 0;
  std::uint64_t dropped_bytes = 0;
  std::uint64_t marked_bytes = 0;
  std::uint64_t in_transit_bytes = 0;
  std::uint64_t delivered_packets = 0;
  std::uint64_t dropped_packets = 0;
};

/// Per-flow accounting of data packets. Control packets (ACKs) are carried
/// but not counted.
struct SimStats {
  std::map<std::uint64_t, FlowStats> flows;
};

/// Hosts are implicit: an endpoint is anything that can receive packets, and
/// a route is a fixed sequence of links ending at an endpoint.
class Network {
 public:
  Network(Simulator& sim, std::uint64_t seed, TraceSink* trace = nullptr);

  LinkId add_link(const LinkConfig& config);
  Link& link(LinkId id) { return *links_.at(id); }

  EndpointId add_endpoint(PacketHandler handler);
  void set_handler(EndpointId id, PacketHandler handler);
  RouteId add_route(std::vector<LinkId> hops, EndpointId destination);

  void send(Packet pkt, RouteId route);

  /// Runs the event loop to t_end and returns the data-packet accounting.
  SimStats run_until(Seconds t_end);
  const SimStats& stats() const { return stats_; }

  Simulator& sim() { return sim_; }
  TraceSink* trace() { return trace_; }
  void emit(std::uint64_t flow, TraceKind kind, double v1, double v2);

 private:
  struct Route {
    std::vector<LinkId> hops;
    EndpointId destination;
  };

  void forward(Packet pkt, RouteId route, std::size_t hop);

  Simulator& sim_;
  std::uint64_t seed_;
  TraceSink* trace_;
  std::vector<std::unique_ptr<Link>> links_;
  std::vector<PacketHandler> endpoints_;
  std::vector<Route> routes_;
  SimStats stats_;
};

}  // namespace sim
