#include "transport/udpcc_socket.hpp"

#include <algorithm>

namespace transport {

UdpCcSocket::UdpCcSocket(cm::CongestionManager& manager, sim::Network& net,
                         sim::RouteId route, cm::FlowId flow,
                         UdpCcConfig config)
    : manager_(manager), net_(net), route_(route), flow_(flow),
      config_(config),
      feedback_(manager, net, flow, config.feedback) {
  manager_.register_send(flow_, [this](cm::FlowId) { on_grant(); });
}

UdpCcSocket::~UdpCcSocket() = default;

bool UdpCcSocket::send(std::uint32_t len, sim::PayloadMeta meta) {
  if (!open_) throw SocketClosed("udp-cc socket is closed");
  if (config_.queue_limit > 0 && queue_.size() >= config_.queue_limit)
    return false;
  queue_.push_back(Pending{len, meta});
  ensure_requests();
  return true;
}

void UdpCcSocket::ensure_requests() {
  while (requests_in_flight_ < queue_.size()) {
    ++requests_in_flight_;
    manager_.request(flow_);
  }
}

void UdpCcSocket::on_grant() {
  if (requests_in_flight_ > 0) --requests_in_flight_;
  if (queue_.empty()) {
    ++empty_grants_;
    manager_.notify(flow_, 0);
    return;
  }
  const Pending next = queue_.front();
  queue_.pop_front();

  sim::Packet pkt;
  pkt.flow = flow_.value;
  pkt.seq = next_seq_++;
  pkt.len = next.len;
  pkt.kind = sim::PacketKind::Data;
  pkt.sent_at = net_.sim().now();
  pkt.meta = next.meta;
  net_.emit(pkt.flow, sim::TraceKind::Send, static_cast<double>(pkt.seq),
            pkt.len);
  if (on_transmit_) on_transmit_(pkt);
  net_.send(pkt, route_);
  feedback_.on_sent(pkt.seq, pkt.len);
  manager_.notify(flow_, pkt.len);
}

void UdpCcSocket::on_feedback(const sim::Packet& appack) {
  if (open_) feedback_.on_feedback(appack);
}

void UdpCcSocket::close() {
  if (!open_) return;
  open_ = false;
  queue_.clear();
  feedback_.stop();
  manager_.close(flow_);
}

}  // namespace transport
