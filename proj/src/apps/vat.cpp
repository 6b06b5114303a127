#include "apps/vat.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apps {

TokenBucket::TokenBucket(double rate, double depth, Seconds now)
    : rate_(rate), depth_(depth), tokens_(depth), last_(now) {}

void TokenBucket::refill(Seconds now) {
  tokens_ = std::min(depth_, tokens_ + rate_ * (now - last_));
  last_ = now;
}

bool TokenBucket::admit(double bytes, Seconds now) {
  refill(now);
  if (tokens_ < bytes) return false;
  tokens_ -= bytes;
  return true;
}

void TokenBucket::set_rate(double rate, Seconds now) {
  refill(now);
  rate_ = rate;
}

DropFromHeadBuffer::DropFromHeadBuffer(std::size_t limit) : limit_(limit) {
  if (limit_ == 0) throw std::invalid_argument("vat: app_buf_limit must be >= 1");
}

std::optional<Frame> DropFromHeadBuffer::push(Frame frame) {
  std::optional<Frame> dropped;
  if (frames_.size() == limit_) {
    dropped = frames_.front();
    frames_.pop_front();
  }
  frames_.push_back(frame);
  return dropped;
}

std::vector<Frame> DropFromHeadBuffer::expire(Seconds cutoff) {
  std::vector<Frame> out;
  while (!frames_.empty() && frames_.front().created < cutoff) {
    out.push_back(frames_.front());
    frames_.pop_front();
  }
  return out;
}

Frame DropFromHeadBuffer::pop() {
  Frame f = frames_.front();
  frames_.pop_front();
  return f;
}

VatSource::VatSource(cm::CongestionManager& manager, sim::Network& net,
                     sim::RouteId route, cm::FlowId flow, VatConfig config)
    : manager_(manager), net_(net), route_(route), flow_(flow),
      config_(config),
      frame_size_(static_cast<std::uint32_t>(
          std::lround(config.bitrate_bps / 8.0 * config.frame_interval))),
      policer_(config.bitrate_bps / 8.0,
               config.policer_depth_frames * frame_size_, net.sim().now()),
      buffer_(config.app_buf_limit),
      feedback_(manager, net, flow, config.feedback) {
  if (!(config_.frame_interval > 0.0) || frame_size_ == 0)
    throw std::invalid_argument("vat: frame interval and size must be > 0");
  manager_.register_send(flow_, [this](cm::FlowId) { on_grant(); });
  manager_.thresh(flow_, config_.thresh_down, config_.thresh_up);
}

VatSource::~VatSource() {
  if (timer_) net_.sim().cancel(*timer_);
}

void VatSource::start() {
  if (running_) return;
  running_ = true;
  start_time_ = net_.sim().now();
  policer_ = TokenBucket(config_.bitrate_bps / 8.0,
                         config_.policer_depth_frames * frame_size_,
                         start_time_);
  manager_.register_update(flow_, [this](cm::FlowId, double rate, Seconds,
                                         double) { on_rate_change(rate); });
  on_frame();
}

void VatSource::stop() {
  running_ = false;
  if (timer_) {
    net_.sim().cancel(*timer_);
    timer_.reset();
  }
  feedback_.stop();
}

void VatSource::on_rate_change(double rate) {
  policer_.set_rate(rate, net_.sim().now());
}

void VatSource::buffer_drop(const Frame& dropped) {
  ++counters_.buffer_drops;
  const double oldest =
      buffer_.empty() ? -1.0 : static_cast<double>(buffer_.front().id);
  net_.emit(flow_.value, sim::TraceKind::BufDrop,
            static_cast<double>(dropped.id), oldest);
}

void VatSource::expire_stale() {
  const Seconds max_wait =
      static_cast<double>(config_.app_buf_limit) * config_.frame_interval;
  // Small slack so a frame exactly at the bound survives rounding.
  for (const Frame& f : buffer_.expire(net_.sim().now() - max_wait - 1e-9))
    buffer_drop(f);
}

void VatSource::ask_for_grant() {
  if (request_outstanding_ || buffer_.empty()) return;
  request_outstanding_ = true;
  manager_.request(flow_);
}

void VatSource::on_frame() {
  timer_.reset();
  const Seconds now = net_.sim().now();
  const Frame frame{next_frame_++, now};
  ++counters_.frames;

  if (!policer_.admit(frame_size_, now)) {
    ++counters_.policed;
    net_.emit(flow_.value, sim::TraceKind::PolicerDrop,
              static_cast<double>(frame.id), policer_.rate());
  } else if (auto dropped = buffer_.push(frame)) {
    buffer_drop(*dropped);
  }
  expire_stale();
  ask_for_grant();

  const Seconds next =
      start_time_ + static_cast<double>(next_frame_) * config_.frame_interval;
  timer_ = net_.sim().schedule(next, [this] { on_frame(); });
}

void VatSource::on_grant() {
  request_outstanding_ = false;
  expire_stale();
  if (!running_ || buffer_.empty()) {
    manager_.notify(flow_, 0);
    return;
  }
  const Frame frame = buffer_.pop();
  const Seconds now = net_.sim().now();
  counters_.max_buffer_delay =
      std::max(counters_.max_buffer_delay, now - frame.created);
  ++counters_.sent;

  sim::Packet pkt;
  pkt.flow = flow_.value;
  pkt.seq = next_seq_++;
  pkt.len = frame_size_;
  pkt.sent_at = now;
  pkt.meta.frame = frame.id;
  net_.emit(pkt.flow, sim::TraceKind::Send, static_cast<double>(frame.id),
            pkt.len);
  feedback_.on_sent(pkt.seq, pkt.len);
  net_.send(pkt, route_);
  manager_.notify(flow_, pkt.len);
  ask_for_grant();
}

}  // namespace apps
