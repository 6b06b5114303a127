#include "apps/alf_source.hpp"

namespace apps {

AlfSource::AlfSource(cm::CongestionManager& manager, sim::Network& net,
                     sim::RouteId route, cm::FlowId flow, AlfConfig config)
    : manager_(manager), net_(net), route_(route), flow_(flow),
      config_(std::move(config)),
      packet_size_(static_cast<std::uint32_t>(manager.mtu(flow))),
      feedback_(manager, net, flow, config_.feedback) {
  validate(config_.layers);
  manager_.register_send(flow_, [this](cm::FlowId) { on_grant(); });
}

void AlfSource::start() {
  if (running_) return;
  running_ = true;
  manager_.request(flow_);
}

void AlfSource::stop() {
  running_ = false;
  feedback_.stop();
}

void AlfSource::on_grant() {
  if (!running_) {
    manager_.notify(flow_, 0);
    return;
  }
  const double rate = manager_.query(flow_).rate;
  const int layer = select_layer(rate, config_.layers);
  if (layer != layer_) {
    if (layer_ >= 0) ++layer_changes_;
    layer_ = layer;
    net_.emit(flow_.value, sim::TraceKind::LayerChange, layer, rate);
  }

  sim::Packet pkt;
  pkt.flow = flow_.value;
  pkt.seq = next_seq_++;
  pkt.len = packet_size_;
  pkt.sent_at = net_.sim().now();
  pkt.meta.layer = layer;
  pkt.meta.frame = pkt.seq;
  net_.emit(pkt.flow, sim::TraceKind::Send, static_cast<double>(pkt.seq),
            pkt.len);
  feedback_.on_sent(pkt.seq, pkt.len);
  net_.send(pkt, route_);

  if (config_.request_before_notify) {
    manager_.request(flow_);
    manager_.notify(flow_, packet_size_);
  } else {
    manager_.notify(flow_, packet_size_);
    manager_.request(flow_);
  }
}

}  // namespace apps
