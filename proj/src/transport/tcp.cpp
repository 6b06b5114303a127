#include "transport/tcp.hpp"

#include <algorithm>
#include <cmath>

namespace transport {

// --- receiver ---------------------------------------------------------------

TcpReceiver::TcpReceiver(sim::Network& net, sim::RouteId ack_route,
                         std::uint64_t flow_tag, TcpReceiverConfig config)
    : net_(net), ack_route_(ack_route), flow_tag_(flow_tag), config_(config) {}

TcpReceiver::~TcpReceiver() {
  if (delack_timer_) net_.sim().cancel(*delack_timer_);
}

void TcpReceiver::send_ack(bool syn, Seconds echo) {
  if (delack_timer_) {
    net_.sim().cancel(*delack_timer_);
    delack_timer_.reset();
  }
  unacked_segments_ = 0;
  sim::Packet ack;
  ack.flow = flow_tag_;
  ack.kind = sim::PacketKind::Ack;
  ack.len = kTcpAckBytes;
  ack.ack = rcv_nxt_;
  ack.syn = syn;
  ack.ece = ece_pending_;
  ack.sent_at = echo;
  ece_pending_ = false;
  net_.send(std::move(ack), ack_route_);
}

void TcpReceiver::on_packet(const sim::Packet& pkt) {
  if (pkt.syn) {
    send_ack(true, pkt.sent_at);
    return;
  }
  if (pkt.kind != sim::PacketKind::Data) return;
  if (pkt.ecn_marked) ece_pending_ = true;

  const std::uint64_t end = pkt.seq + pkt.len;
  if (end <= rcv_nxt_ || pkt.seq > rcv_nxt_) {
    // Duplicate or out of order: buffer it and ACK at once.
    if (pkt.seq > rcv_nxt_) out_of_order_[pkt.seq] = pkt.len;
    send_ack(false, pkt.sent_at);
    return;
  }

  const bool filled_hole = !out_of_order_.empty();
  rcv_nxt_ = end;
  while (!out_of_order_.empty() && out_of_order_.begin()->first <= rcv_nxt_) {
    auto it = out_of_order_.begin();
    rcv_nxt_ = std::max(rcv_nxt_, it->first + it->second);
    out_of_order_.erase(it);
  }
  if (on_deliver_) on_deliver_(rcv_nxt_);

  if (!config_.delayed_ack || filled_hole || pkt.ecn_marked) {
    send_ack(false, pkt.sent_at);
    return;
  }
  if (++unacked_segments_ >= 2) {
    send_ack(false, pkt.sent_at);
    return;
  }
  if (!delack_timer_) {
    const Seconds echo = pkt.sent_at;
    delack_timer_ =
        net_.sim().schedule_in(config_.delayed_ack_timeout, [this, echo] {
          delack_timer_.reset();
          send_ack(false, echo);
        });
  }
}

// --- sender -----------------------------------------------------------------

TcpSender::TcpSender(cm::CongestionManager& manager, sim::Network& net,
                     sim::RouteId route, cm::FlowId flow,
                     TcpSenderConfig config)
    : manager_(manager), net_(net), route_(route), flow_(flow),
      config_(config) {
  mss_ = static_cast<std::uint32_t>(manager_.mtu(flow_));
  manager_.register_send(flow_, [this](cm::FlowId) { on_grant(); });
}

TcpSender::~TcpSender() {
  if (rto_timer_) net_.sim().cancel(*rto_timer_);
}

void TcpSender::connect() {
  if (established_ || closed_) return;
  if (!config_.handshake) {
    established_ = true;
    ensure_requests();
    return;
  }
  syn_sent_at_ = net_.sim().now();
  sim::Packet syn;
  syn.flow = flow_.value;
  syn.kind = sim::PacketKind::Ack;
  syn.syn = true;
  syn.len = kTcpAckBytes;
  syn.sent_at = syn_sent_at_;
  net_.send(std::move(syn), route_);
  arm_rto();
}

void TcpSender::write(std::uint64_t nbytes) {
  if (closing_ || closed_) throw ConnectionClosed("tcp connection is closed");
  written_ += nbytes;
  ensure_requests();
}

void TcpSender::close() {
  if (closed_) return;
  closing_ = true;
  maybe_finish();
}

std::uint64_t TcpSender::wanted_grants() const {
  if (!established_ || closed_) return 0;
  const std::uint64_t unsent = written_ > snd_nxt_ ? written_ - snd_nxt_ : 0;
  return rtx_queue_.size() + (unsent + mss_ - 1) / mss_;
}

void TcpSender::ensure_requests() {
  while (requests_in_flight_ < wanted_grants()) {
    ++requests_in_flight_;
    manager_.request(flow_);
  }
}

Seconds TcpSender::current_rto() const {
  Seconds base = config_.initial_rto;
  if (!closed_) {
    const cm::QueryResult q = manager_.query(flow_);
    if (q.srtt > 0.0)
      base = std::clamp(q.srtt + 4.0 * q.rttvar, config_.min_rto,
                        config_.max_rto);
  }
  return std::min(base * std::ldexp(1.0, static_cast<int>(backoff_)),
                  config_.max_rto);
}

void TcpSender::arm_rto() {
  if (rto_timer_) return;
  rto_timer_ = net_.sim().schedule_in(current_rto(), [this] {
    rto_timer_.reset();
    on_rto();
  });
}

void TcpSender::cancel_rto() {
  if (!rto_timer_) return;
  net_.sim().cancel(*rto_timer_);
  rto_timer_.reset();
}

void TcpSender::restart_rto() {
  cancel_rto();
  arm_rto();
}

void TcpSender::report(cm::LossMode mode, Bytes nsent, Bytes nrecd,
                       std::optional<Seconds> rtt) {
  manager_.update(flow_, cm::FeedbackReport{nsent, nrecd, mode, rtt});
}

void TcpSender::transmit(std::uint64_t seq, std::uint32_t len,
                         bool retransmit) {
  sim::Packet pkt;
  pkt.flow = flow_.value;
  pkt.seq = seq;
  pkt.len = len;
  pkt.kind = sim::PacketKind::Data;
  pkt.sent_at = net_.sim().now();
  net_.emit(pkt.flow, sim::TraceKind::Send, static_cast<double>(seq), len);
  net_.send(std::move(pkt), route_);
  ++counters_.segments_sent;
  if (retransmit) ++counters_.retransmissions;
  charged_ += len;
  manager_.notify(flow_, len);
  arm_rto();
}

void TcpSender::on_grant() {
  ++counters_.grants;
  if (requests_in_flight_ > 0) --requests_in_flight_;

  while (!rtx_queue_.empty() && *rtx_queue_.begin() < snd_una_)
    rtx_queue_.erase(rtx_queue_.begin());

  if (!rtx_queue_.empty()) {
    const std::uint64_t seq = *rtx_queue_.begin();
    rtx_queue_.erase(rtx_queue_.begin());
    const auto len = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(mss_, snd_max_ - seq));
    timing_ = false;
    transmit(seq, len, true);
    return;
  }

  if (established_ && snd_nxt_ < written_) {
    const std::uint64_t seq = snd_nxt_;
    const auto len = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(mss_, written_ - snd_nxt_));
    const bool retransmit = seq < snd_max_;
    snd_nxt_ += len;
    snd_max_ = std::max(snd_max_, snd_nxt_);
    if (!retransmit && !timing_) {
      timing_ = true;
      timed_end_ = snd_nxt_;
      timed_at_ = net_.sim().now();
    }
    transmit(seq, len, retransmit);
    return;
  }

  ++counters_.empty_grants;
  manager_.notify(flow_, 0);
}

void TcpSender::on_packet(const sim::Packet& pkt) {
  if (closed_ || pkt.kind != sim::PacketKind::Ack) return;
  const Seconds now = net_.sim().now();

  if (pkt.syn) {
    if (established_) return;
    established_ = true;
    cancel_rto();
    backoff_ = 0;
    const Seconds rtt = now - syn_sent_at_;
    if (rtt > 0.0) report(cm::LossMode::NoLoss, 0, 0, rtt);
    ensure_requests();
    maybe_finish();
    return;
  }
  if (!established_) return;

  const std::uint64_t ack = pkt.ack;
  if (ack > snd_max_) return;

  if (ack > snd_una_) {
    std::optional<Seconds> sample;
    if (timing_ && ack >= timed_end_) {
      sample = now - timed_at_;
      timing_ = false;
      ++counters_.rtt_samples;
    }
    snd_una_ = ack;
    snd_nxt_ = std::max(snd_nxt_, snd_una_);
    while (!rtx_queue_.empty() && *rtx_queue_.begin() < snd_una_)
      rtx_queue_.erase(rtx_queue_.begin());
    dup_acks_ = 0;
    backoff_ = 0;

    // Release whatever this connection charged beyond what is still unacked.
    const std::uint64_t unacked = snd_nxt_ - snd_una_;
    const Bytes nsent = charged_ > unacked ? charged_ - unacked : 0;
    charged_ -= nsent;

    if (in_recovery_) {
      if (snd_una_ >= recover_) {
        in_recovery_ = false;
      } else if (snd_una_ < snd_nxt_) {
        rtx_queue_.insert(snd_una_);
        timing_ = false;
      }
    }

    const cm::LossMode mode =
        pkt.ece ? cm::LossMode::Ecn : cm::LossMode::NoLoss;
    if (nsent > 0 || sample || mode != cm::LossMode::NoLoss)
      report(mode, nsent, nsent, sample);

    if (snd_una_ == snd_max_)
      cancel_rto();
    else
      restart_rto();
    ensure_requests();
    maybe_finish();
    return;
  }

  if (ack != snd_una_ || snd_una_ == snd_max_) return;

  ++dup_acks_;
  if (dup_acks_ == config_.dupack_threshold && !in_recovery_ &&
      snd_una_ >= recover_) {
    ++counters_.fast_retransmits;
    in_recovery_ = true;
    recover_ = snd_max_;
    timing_ = false;
    const Bytes nsent = std::min<Bytes>(mss_, charged_);
    charged_ -= nsent;
    rtx_queue_.insert(snd_una_);
    report(cm::LossMode::Transient, nsent, 0, std::nullopt);
    ensure_requests();
  } else if (dup_acks_ >= config_.dupack_threshold) {
    // The duplicate was triggered by a segment that left the network.
    const Bytes credit = std::min<Bytes>(mss_, charged_);
    if (credit == 0) return;
    charged_ -= credit;
    report(cm::LossMode::NoLoss, credit, credit, std::nullopt);
    ensure_requests();
  }
}

void TcpSender::on_rto() {
  if (closed_) return;
  if (!established_) {
    backoff_ = std::min(backoff_ + 1, 16u);
    syn_sent_at_ = net_.sim().now();
    sim::Packet syn;
    syn.flow = flow_.value;
    syn.kind = sim::PacketKind::Ack;
    syn.syn = true;
    syn.len = kTcpAckBytes;
    syn.sent_at = syn_sent_at_;
    net_.send(std::move(syn), route_);
    arm_rto();
    return;
  }
  if (snd_una_ == snd_max_) return;

  ++counters_.timeouts;
  const Bytes nsent = charged_;
  charged_ = 0;
  report(cm::LossMode::Persistent, nsent, 0, std::nullopt);

  // Go back N: the head goes through the retransmission queue and
  // everything after it is resent as the window reopens.
  rtx_queue_.clear();
  rtx_queue_.insert(snd_una_);
  snd_nxt_ = snd_una_ + std::min<std::uint64_t>(mss_, snd_max_ - snd_una_);
  in_recovery_ = false;
  recover_ = snd_max_;
  dup_acks_ = 0;
  timing_ = false;
  backoff_ = std::min(backoff_ + 1, 16u);
  arm_rto();
  ensure_requests();
}

void TcpSender::maybe_finish() {
  if (!established_ || snd_una_ != written_) return;
  if (written_ > 0 && on_all_acked_) on_all_acked_();
  if (closing_ && !closed_) {
    closed_ = true;
    cancel_rto();
    manager_.close(flow_);
  }
}

}  // namespace transport
