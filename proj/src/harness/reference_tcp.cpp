#include "harness/reference_tcp.hpp"

#include <algorithm>
#include <cmath>

namespace harness {

namespace {
constexpr std::uint32_t kAckBytes = 40;
}

sim::LinkConfig to_link_config(const LinkParams& p) {
  return sim::LinkConfig{p.bandwidth_bps, p.delay, p.queue_limit,
                         p.loss_prob,     p.ecn,   p.mtu};
}

ReferenceTcpSender::ReferenceTcpSender(sim::Network& net, sim::RouteId route,
                                       std::uint64_t flow_tag,
                                       ReferenceTcpConfig config)
    : net_(net), route_(route), flow_(flow_tag), config_(config),
      cwnd_(config.initial_window),
      ssthresh_(static_cast<double>(config.initial_ssthresh) / config.mss) {}

ReferenceTcpSender::~ReferenceTcpSender() {
  if (timer_) net_.sim().cancel(*timer_);
}

void ReferenceTcpSender::start() { send_data(); }

double ReferenceTcpSender::flight_segments() const {
  return static_cast<double>(snd_max_ - snd_una_) / config_.mss;
}

double ReferenceTcpSender::rto() const {
  double base = config_.initial_rto;
  if (srtt_)
    base = std::clamp(*srtt_ + 4.0 * rttvar_, config_.min_rto, config_.max_rto);
  return std::min(base * std::ldexp(1.0, static_cast<int>(backoff_)),
                  config_.max_rto);
}

void ReferenceTcpSender::arm_timer(bool restart) {
  if (timer_ && !restart) return;
  if (timer_) net_.sim().cancel(*timer_);
  timer_ = net_.sim().schedule_in(rto(), [this] {
    timer_.reset();
    on_timeout();
  });
}

void ReferenceTcpSender::transmit(std::uint64_t seq) {
  sim::Packet pkt;
  pkt.flow = flow_;
  pkt.seq = seq;
  pkt.len = config_.mss;
  pkt.kind = sim::PacketKind::Data;
  pkt.sent_at = net_.sim().now();
  net_.emit(flow_, sim::TraceKind::Send, static_cast<double>(seq), pkt.len);
  net_.send(std::move(pkt), route_);
  arm_timer(false);
}

void ReferenceTcpSender::send_data() {
  const auto window =
      static_cast<std::uint64_t>(std::floor(cwnd_)) * config_.mss;
  while (snd_nxt_ < snd_una_ + window) {
    const std::uint64_t seq = snd_nxt_;
    if (seq >= snd_max_ && !timing_) {
      timing_ = true;
      timed_seq_ = seq;
      timed_at_ = net_.sim().now();
    }
    snd_nxt_ += config_.mss;
    snd_max_ = std::max(snd_max_, snd_nxt_);
    transmit(seq);
  }
}

void ReferenceTcpSender::on_packet(const sim::Packet& ack) {
  if (ack.kind != sim::PacketKind::Ack || ack.ack > snd_max_) return;
  const double now = net_.sim().now();

  if (ack.ack > snd_una_) {
    const double acked_segments =
        static_cast<double>(ack.ack - snd_una_) / config_.mss;
    if (timing_ && ack.ack > timed_seq_) {
      const double sample = now - timed_at_;
      if (!srtt_) {
        srtt_ = sample;
        rttvar_ = sample / 2.0;
      } else {
        rttvar_ = 0.75 * rttvar_ + 0.25 * std::fabs(sample - *srtt_);
        srtt_ = 0.875 * *srtt_ + 0.125 * sample;
      }
      timing_ = false;
    }
    snd_una_ = ack.ack;
    snd_nxt_ = std::max(snd_nxt_, snd_una_);
    backoff_ = 0;

    if (in_recovery_) {
      if (snd_una_ >= recover_) {
        in_recovery_ = false;
        cwnd_ = ssthresh_;
      } else {
        // Partial ACK: resend the next hole and deflate by what was acked.
        timing_ = false;
        transmit(snd_una_);
        cwnd_ = std::max(1.0, cwnd_ - acked_segments + 1.0);
      }
    } else if (cwnd_ < ssthresh_) {
      cwnd_ += 1.0;
    } else {
      cwnd_ += 1.0 / cwnd_;
    }
    dupacks_ = in_recovery_ ? dupacks_ : 0;

    if (snd_una_ == snd_max_) {
      if (timer_) net_.sim().cancel(*timer_);
      timer_.reset();
    } else {
      arm_timer(true);
    }
    send_data();
    return;
  }

  if (ack.ack != snd_una_ || snd_una_ == snd_max_) return;
  ++dupacks_;
  if (!in_recovery_ && dupacks_ == 3 && snd_una_ >= recover_) {
    ssthresh_ = std::max(flight_segments() / 2.0, 2.0);
    recover_ = snd_max_;
    in_recovery_ = true;
    timing_ = false;
    transmit(snd_una_);
    cwnd_ = ssthresh_ + 3.0;
  } else if (in_recovery_) {
    cwnd_ += 1.0;
    send_data();
  }
}

void ReferenceTcpSender::on_timeout() {
  if (snd_una_ == snd_max_) return;
  ++timeouts_;
  ssthresh_ = std::max(flight_segments() / 2.0, 2.0);
  cwnd_ = 1.0;
  recover_ = snd_max_;
  in_recovery_ = false;
  dupacks_ = 0;
  timing_ = false;
  snd_nxt_ = snd_una_;
  backoff_ = std::min(backoff_ + 1, 16u);
  arm_timer(true);
  send_data();
}

ReferenceTcpReceiver::ReferenceTcpReceiver(sim::Network& net,
                                           sim::RouteId ack_route,
                                           std::uint64_t flow_tag)
    : net_(net), ack_route_(ack_route), flow_(flow_tag) {}

void ReferenceTcpReceiver::on_packet(const sim::Packet& pkt) {
  if (pkt.kind != sim::PacketKind::Data) return;
  if (pkt.seq == rcv_nxt_) {
    rcv_nxt_ += pkt.len;
    for (auto it = out_of_order_.begin();
         it != out_of_order_.end() && it->first <= rcv_nxt_;
         it = out_of_order_.erase(it))
      rcv_nxt_ = std::max(rcv_nxt_, it->first + it->second);
  } else if (pkt.seq > rcv_nxt_) {
    out_of_order_[pkt.seq] = pkt.len;
  }
  sim::Packet ack;
  ack.flow = flow_;
  ack.kind = sim::PacketKind::Ack;
  ack.len = kAckBytes;
  ack.ack = rcv_nxt_;
  ack.sent_at = pkt.sent_at;
  net_.send(std::move(ack), ack_route_);
}

ReferenceTcpResult oracle_reference_tcp(const LinkParams& forward,
                                        const LinkParams& reverse,
                                        double duration, std::uint64_t seed) {
  sim::Simulator simulator;
  sim::Network net(simulator, seed);
  const sim::LinkId fwd = net.add_link(to_link_config(forward));
  const sim::LinkId rev = net.add_link(to_link_config(reverse));

  ReferenceTcpSender* sender_ptr = nullptr;
  ReferenceTcpReceiver* receiver_ptr = nullptr;
  const sim::EndpointId sender_ep = net.add_endpoint(
      [&](const sim::Packet& p) { sender_ptr->on_packet(p); });
  const sim::EndpointId receiver_ep = net.add_endpoint(
      [&](const sim::Packet& p) { receiver_ptr->on_packet(p); });
  const sim::RouteId data = net.add_route({fwd}, receiver_ep);
  const sim::RouteId acks = net.add_route({rev}, sender_ep);

  ReferenceTcpConfig config;
  config.mss = forward.mtu;
  ReferenceTcpSender sender(net, data, 1, config);
  ReferenceTcpReceiver receiver(net, acks, 1);
  sender_ptr = &sender;
  receiver_ptr = &receiver;

  sender.start();
  net.run_until(duration);
  return ReferenceTcpResult{
      static_cast<double>(receiver.delivered()) * 8.0 / duration,
      receiver.delivered(), sender.timeouts()};
}

}  // namespace harness
