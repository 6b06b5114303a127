#include "sim/network.hpp"

#include <stdexcept>

namespace sim {

Network::Network(Simulator& sim, std::uint64_t seed, TraceSink* trace)
    : sim_(sim), seed_(seed), trace_(trace) {}

LinkId Network::add_link(const LinkConfig& config) {
  const auto id = static_cast<LinkId>(links_.size());
  links_.push_back(std::make_unique<Link>(id, config, seed_));
  return id;
}

EndpointId Network::add_endpoint(PacketHandler handler) {
  endpoints_.push_back(std::move(handler));
  return static_cast<EndpointId>(endpoints_.size() - 1);
}

void Network::set_handler(EndpointId id, PacketHandler handler) {
  endpoints_.at(id) = std::move(handler);
}

RouteId Network::add_route(std::vector<LinkId> hops, EndpointId destination) {
  if (hops.empty()) throw std::invalid_argument("route needs at least one link");
  for (LinkId hop : hops)
    if (hop >= links_.size()) throw std::invalid_argument("unknown link in route");
  if (destination >= endpoints_.size())
    throw std::invalid_argument("unknown endpoint in route");
  routes_.push_back(Route{std::move(hops), destination});
  return static_cast<RouteId>(routes_.size() - 1);
}

void Network::emit(std::uint64_t flow, TraceKind kind, double v1, double v2) {
  if (trace_) trace_->emit(TraceRecord{sim_.now(), flow, kind, v1, v2});
}

void Network::send(Packet pkt, RouteId route) {
  routes_.at(route);
  if (pkt.kind == PacketKind::Data) {
    FlowStats& fs = stats_.flows[pkt.flow];
    fs.injected_bytes += pkt.len;
    fs.in_transit_bytes += pkt.len;
  }
  forward(std::move(pkt), route, 0);
}

void Network::forward(Packet pkt, RouteId route_id, std::size_t hop) {
  const Route& route = routes_[route_id];
  const bool data = pkt.kind == PacketKind::Data;

  if (hop == route.hops.size()) {
    if (data) {
      FlowStats& fs = stats_.flows[pkt.flow];
      fs.in_transit_bytes -= pkt.len;
      fs.delivered_bytes += pkt.len;
      ++fs.delivered_packets;
      emit(pkt.flow, TraceKind::Deliver, static_cast<double>(pkt.seq), pkt.len);
    }
    const PacketHandler& handler = endpoints_[route.destination];
    if (handler) handler(pkt);
    return;
  }

  Link& link = *links_[route.hops[hop]];
  const bool was_marked = pkt.ecn_marked;
  const Link::Admission adm = link.enqueue(pkt, sim_.now());
  if (adm.result == EnqueueResult::Dropped) {
    if (data) {
      FlowStats& fs = stats_.flows[pkt.flow];
      fs.in_transit_bytes -= pkt.len;
      fs.dropped_bytes += pkt.len;
      ++fs.dropped_packets;
      emit(pkt.flow, TraceKind::Drop, static_cast<double>(pkt.seq), pkt.len);
    }
    return;
  }
  if (adm.result == EnqueueResult::Marked && data && !was_marked) {
    stats_.flows[pkt.flow].marked_bytes += pkt.len;
    emit(pkt.flow, TraceKind::Mark, static_cast<double>(pkt.seq), pkt.len);
  }
  sim_.schedule(adm.delivery_time,
                [this, pkt = std::move(pkt), route_id, hop]() mutable {
                  forward(std::move(pkt), route_id, hop + 1);
                });
}

SimStats Network::run_until(Seconds t_end) {
  sim_.run_until(t_end);
  return stats_;
}

}  // namespace sim
