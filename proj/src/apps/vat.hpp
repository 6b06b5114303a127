#pragma once

#include <deque>
#include <optional>

#include "apps/layers.hpp"
#include "core/congestion_manager.hpp"
#include "sim/network.hpp"
#include "transport/datagram_feedback.hpp"

namespace apps {

/// Token bucket in bytes. Starts full.
class TokenBucket {
 public:
  TokenBucket(double rate, double depth, Seconds now);
  /// Takes `bytes` tokens if available.
  bool admit(double bytes, Seconds now);
  void set_rate(double rate, Seconds now);
  double rate() const { return rate_; }
  double tokens() const { return tokens_; }

 private:
  void refill(Seconds now);
  double rate_;
  double depth_;
  double tokens_;
  Seconds last_;
};

struct Frame {
  std::uint64_t id = 0;
  Seconds created = 0.0;
};

/// Bounded FIFO that makes room by discarding its oldest entry.
class DropFromHeadBuffer {
 public:
  explicit DropFromHeadBuffer(std::size_t limit);
  /// Appends `frame`; returns the frame pushed out, if any.
  std::optional<Frame> push(Frame frame);
  /// Removes and returns the frames created before `cutoff`.
  std::vector<Frame> expire(Seconds cutoff);
  Frame pop();

  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  std::size_t limit() const { return limit_; }
  const Frame& front() const { return frames_.front(); }

 private:
  std::size_t limit_;
  std::deque<Frame> frames_;
};

struct VatConfig {
  double bitrate_bps = 64000.0;
  Seconds frame_interval = 0.020;
  std::size_t app_buf_limit = 4;
  double policer_depth_frames = 2.0;
  double thresh_down = 0.7;
  double thresh_up = 1.4;
  transport::FeedbackLoopConfig feedback;
};

/// Constant-bit-rate audio source: a policer tracking the CM rate thins the
/// frame stream, and a small drop-from-head buffer feeds the flow one packet
/// per grant. Frames older than app_buf_limit frame intervals are discarded
/// from the head as well, so a sent frame never waited longer than that.
class VatSource {
 public:
  VatSource(cm::CongestionManager& manager, sim::Network& net,
            sim::RouteId route, cm::FlowId flow, VatConfig config = {});
  ~VatSource();

  VatSource(const VatSource&) = delete;
  VatSource& operator=(const VatSource&) = delete;

  void start();
  void stop();
  void on_feedback(const sim::Packet& appack) { feedback_.on_feedback(appack); }

  /// cmapp_update handler: the policer follows the reported rate.
  void on_rate_change(double rate);

  std::uint32_t frame_size() const { return frame_size_; }
  double policer_rate() const { return policer_.rate(); }
  const DropFromHeadBuffer& buffer() const { return buffer_; }

  struct Counters {
    std::uint64_t frames = 0;
    std::uint64_t policed = 0;
    std::uint64_t buffer_drops = 0;
    std::uint64_t sent = 0;
    Seconds max_buffer_delay = 0.0;
  };
  const Counters& counters() const { return counters_; }

 private:
  void on_frame();
  void on_grant();
  void expire_stale();
  void ask_for_grant();
  void buffer_drop(const Frame& dropped);

  cm::CongestionManager& manager_;
  sim::Network& net_;
  sim::RouteId route_;
  cm::FlowId flow_;
  VatConfig config_;
  std::uint32_t frame_size_;
  TokenBucket policer_;
  DropFromHeadBuffer buffer_;
  transport::FeedbackLoop feedback_;
  bool request_outstanding_ = false;
  bool running_ = false;
  std::uint64_t next_frame_ = 0;
  std::uint64_t next_seq_ = 0;
  Seconds start_time_ = 0.0;
  std::optional<sim::EventId> timer_;
  Counters counters_;
};

}  // namespace apps
