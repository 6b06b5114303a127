#include "transport/datagram_feedback.hpp"

#include <algorithm>
#include <memory>

namespace transport {

namespace {
constexpr std::uint32_t kAckHeaderBytes = 28;
}

void FeedbackTracker::on_sent(std::uint64_t seq, Bytes len, Seconds now) {
  outstanding_[seq] = Sent{len, now};
}

std::optional<FeedbackTracker::Outcome> FeedbackTracker::on_appack(
    const AppAck& ack, Seconds now) {
  Outcome out;
  for (const SeqRange& range : ack.ranges) {
    auto it = outstanding_.lower_bound(range.first);
    while (it != outstanding_.end() && it->first <= range.last) {
      out.report.nrecd += it->second.len;
      ++out.acked_packets;
      it = outstanding_.erase(it);
    }
  }

  Bytes lost = 0;
  for (auto it = outstanding_.begin(); it != outstanding_.end();) {
    if (it->first + reorder_threshold_ > ack.highest_seen) break;
    lost += it->second.len;
    ++out.lost_packets;
    it = outstanding_.erase(it);
  }

  if (out.acked_packets == 0 && out.lost_packets == 0) return std::nullopt;

  out.report.nsent = out.report.nrecd + lost;
  if (out.lost_packets > 0)
    out.report.lossmode = cm::LossMode::Transient;
  else if (ack.ecn_marked > 0)
    out.report.lossmode = cm::LossMode::Ecn;

  if (out.acked_packets > 0) {
    const Seconds rtt = now - ack.echo_sent_at - ack.hold_time;
    if (rtt > 0.0) {
      out.report.rtt = rtt;
      latest_rtt_ = rtt;
    }
  }
  return out;
}

std::optional<cm::FeedbackReport> FeedbackTracker::expire(Seconds now,
                                                          Seconds timeout) {
  cm::FeedbackReport report;
  report.lossmode = cm::LossMode::Persistent;
  for (auto it = outstanding_.begin(); it != outstanding_.end();) {
    if (now - it->second.at >= timeout) {
      report.nsent += it->second.len;
      it = outstanding_.erase(it);
    } else {
      ++it;
    }
  }
  if (report.nsent == 0) return std::nullopt;
  return report;
}

std::optional<Seconds> FeedbackTracker::oldest_send_time() const {
  std::optional<Seconds> oldest;
  for (const auto& [seq, sent] : outstanding_)
    if (!oldest || sent.at < *oldest) oldest = sent.at;
  return oldest;
}

FeedbackLoop::FeedbackLoop(cm::CongestionManager& manager, sim::Network& net,
                           cm::FlowId flow, FeedbackLoopConfig config)
    : manager_(manager), net_(net), flow_(flow), config_(config) {}

FeedbackLoop::~FeedbackLoop() {
  if (timer_) net_.sim().cancel(*timer_);
}

void FeedbackLoop::on_sent(std::uint64_t seq, Bytes len) {
  tracker_.on_sent(seq, len, net_.sim().now());
  arm();
}

void FeedbackLoop::on_feedback(const sim::Packet& appack) {
  if (stopped_ || !appack.appack) return;
  auto outcome = tracker_.on_appack(*appack.appack, net_.sim().now());
  if (!outcome) return;
  ++updates_;
  manager_.update(flow_, outcome->report);
}

void FeedbackLoop::stop() {
  stopped_ = true;
  if (timer_) {
    net_.sim().cancel(*timer_);
    timer_.reset();
  }
}

Seconds FeedbackLoop::loss_timeout() const {
  const Seconds rtt = tracker_.latest_rtt().value_or(0.0);
  return config_.feedback_delay +
         std::max(config_.min_loss_timeout, 4.0 * rtt);
}

void FeedbackLoop::arm() {
  if (stopped_ || timer_ || tracker_.in_flight() == 0) return;
  const Seconds oldest = *tracker_.oldest_send_time();
  const Seconds at = std::max(net_.sim().now(), oldest + loss_timeout());
  timer_ = net_.sim().schedule(at, [this] {
    timer_.reset();
    on_timer();
  });
}

void FeedbackLoop::on_timer() {
  if (auto report = tracker_.expire(net_.sim().now(), loss_timeout())) {
    ++updates_;
    manager_.update(flow_, *report);
  }
  arm();
}

DatagramReceiver::DatagramReceiver(sim::Network& net, sim::RouteId ack_route,
                                   std::uint64_t flow_tag,
                                   FeedbackPolicy policy)
    : net_(net), ack_route_(ack_route), flow_tag_(flow_tag), policy_(policy) {
  if (policy_.batch_packets == 0) policy_.batch_packets = 1;
}

DatagramReceiver::~DatagramReceiver() {
  if (flush_timer_) net_.sim().cancel(*flush_timer_);
}

void DatagramReceiver::on_packet(const sim::Packet& pkt) {
  if (pkt.kind != sim::PacketKind::Data) return;
  const Seconds now = net_.sim().now();
  received_bytes_ += pkt.len;
  ++received_packets_;
  if (!have_highest_ || pkt.seq > highest_seen_) {
    have_highest_ = true;
    highest_seen_ = pkt.seq;
    highest_sent_at_ = pkt.sent_at;
    highest_arrival_ = now;
  }
  batch_.push_back(pkt.seq);
  if (pkt.ecn_marked) ++batch_marked_;
  if (on_data_) on_data_(pkt);

  if (batch_.size() >= policy_.batch_packets) {
    flush();
  } else if (!flush_timer_ && policy_.batch_timeout > 0.0) {
    flush_timer_ = net_.sim().schedule_in(policy_.batch_timeout, [this] {
      flush_timer_.reset();
      flush();
    });
  }
}

void DatagramReceiver::flush() {
  if (flush_timer_) {
    net_.sim().cancel(*flush_timer_);
    flush_timer_.reset();
  }
  if (batch_.empty()) return;
  std::sort(batch_.begin(), batch_.end());
  auto ack = std::make_shared<AppAck>();
  ack->ranges = to_ranges(batch_);
  ack->highest_seen = highest_seen_;
  ack->echo_sent_at = highest_sent_at_;
  ack->hold_time = net_.sim().now() - highest_arrival_;
  ack->ecn_marked = batch_marked_;
  batch_.clear();
  batch_marked_ = 0;

  sim::Packet out;
  out.flow = flow_tag_;
  out.kind = sim::PacketKind::AppAck;
  out.len = kAckHeaderBytes + static_cast<std::uint32_t>(encode(*ack).size());
  out.sent_at = net_.sim().now();
  out.appack = std::move(ack);
  ++acks_sent_;
  net_.send(std::move(out), ack_route_);
}

}  // namespace transport
