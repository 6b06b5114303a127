#include "apps/rate_source.hpp"

namespace apps {

RateSource::RateSource(cm::CongestionManager& manager, sim::Network& net,
                       sim::RouteId route, cm::FlowId flow,
                       RateSourceConfig config)
    : manager_(manager), net_(net), flow_(flow), config_(std::move(config)),
      socket_(manager, net, route, flow, config_.socket),
      packet_size_(config_.packet_size
                       ? config_.packet_size
                       : static_cast<std::uint32_t>(manager.mtu(flow))) {
  validate(config_.layers);
  manager_.thresh(flow_, config_.thresh_down, config_.thresh_up);
}

RateSource::~RateSource() {
  if (timer_) net_.sim().cancel(*timer_);
}

void RateSource::start() {
  if (timer_) return;
  net_.emit(flow_.value, sim::TraceKind::LayerChange, layer_, 0.0);
  manager_.register_update(
      flow_, [this](cm::FlowId, double rate, Seconds, double) { on_rate(rate); });
  tick();
}

void RateSource::stop() {
  if (timer_) {
    net_.sim().cancel(*timer_);
    timer_.reset();
  }
  socket_.close();
}

Seconds RateSource::send_period() const {
  return packet_size_ / config_.layers.rates[static_cast<std::size_t>(layer_)];
}

void RateSource::on_rate(double rate) {
  const int layer = select_layer(rate, config_.layers);
  if (layer == layer_) return;
  layer_ = layer;
  ++layer_changes_;
  net_.emit(flow_.value, sim::TraceKind::LayerChange, layer, rate);
}

void RateSource::tick() {
  timer_.reset();
  sim::PayloadMeta meta{layer_, next_frame_++};
  if (!socket_.send(packet_size_, meta)) ++refused_;
  timer_ = net_.sim().schedule_in(send_period(), [this] { tick(); });
}

}  // namespace apps
