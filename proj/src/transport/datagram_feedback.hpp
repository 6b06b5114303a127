#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "core/congestion_manager.hpp"
#include "sim/network.hpp"
#include "transport/appack.hpp"

namespace transport {

using cm::Bytes;
using cm::Seconds;

/// Sender-side bookkeeping that turns application acknowledgements into
/// cm_update reports. A datagram is declared lost once a sequence at least
/// `reorder_threshold` higher has been seen by the receiver.
class FeedbackTracker {
 public:
  explicit FeedbackTracker(std::uint64_t reorder_threshold = 3)
      : reorder_threshold_(reorder_threshold) {}

  void on_sent(std::uint64_t seq, Bytes len, Seconds now);

  struct Outcome {
    cm::FeedbackReport report;
    std::size_t acked_packets = 0;
    std::size_t lost_packets = 0;
  };
  /// Returns nullopt when the ack covers nothing still outstanding.
  std::optional<Outcome> on_appack(const AppAck& ack, Seconds now);

  /// Declares datagrams sent at or before now - timeout lost (Persistent).
  std::optional<cm::FeedbackReport> expire(Seconds now, Seconds timeout);

  std::size_t in_flight() const { return outstanding_.size(); }
  std::optional<Seconds> oldest_send_time() const;
  std::optional<Seconds> latest_rtt() const { return latest_rtt_; }

 private:
  struct Sent {
    Bytes len;
    Seconds at;
  };
  std::uint64_t reorder_threshold_;
  std::map<std::uint64_t, Sent> outstanding_;
  std::optional<Seconds> latest_rtt_;
};

struct FeedbackLoopConfig {
  /// Longest the receiver may hold feedback; stretches the loss timeout.
  Seconds feedback_delay = 0.0;
  /// Floor of the feedback loss timeout.
  Seconds min_loss_timeout = 1.0;
};

/// Sender half of a datagram flow's feedback: turns AppAcks into cm_update
/// calls and, when feedback stops, reports the silent datagrams as
/// persistent loss after feedback_delay + max(min_loss_timeout, 4 rtt).
class FeedbackLoop {
 public:
  FeedbackLoop(cm::CongestionManager& manager, sim::Network& net,
               cm::FlowId flow, FeedbackLoopConfig config = {});
  ~FeedbackLoop();

  FeedbackLoop(const FeedbackLoop&) = delete;
  FeedbackLoop& operator=(const FeedbackLoop&) = delete;

  void on_sent(std::uint64_t seq, Bytes len);
  void on_feedback(const sim::Packet& appack);
  /// Cancels the loss timer; later feedback is ignored.
  void stop();

  std::uint64_t updates_issued() const { return updates_; }
  std::size_t in_flight() const { return tracker_.in_flight(); }

 private:
  Seconds loss_timeout() const;
  void arm();
  void on_timer();

  cm::CongestionManager& manager_;
  sim::Network& net_;
  cm::FlowId flow_;
  FeedbackLoopConfig config_;
  FeedbackTracker tracker_;
  std::optional<sim::EventId> timer_;
  bool stopped_ = false;
  std::uint64_t updates_ = 0;
};

struct FeedbackPolicy {
  /// Flush an AppAck after this many datagrams ...
  std::uint32_t batch_packets = 1;
  /// ... or this long after the first unacknowledged arrival, if sooner.
  Seconds batch_timeout = 0.0;
};

/// Receiver half of a datagram flow: records arrivals and returns AppAcks on
/// the reverse route according to the feedback policy.
class DatagramReceiver {
 public:
  DatagramReceiver(sim::Network& net, sim::RouteId ack_route,
                   std::uint64_t flow_tag, FeedbackPolicy policy = {});
  ~DatagramReceiver();

  DatagramReceiver(const DatagramReceiver&) = delete;
  DatagramReceiver& operator=(const DatagramReceiver&) = delete;

  void on_packet(const sim::Packet& pkt);
  void set_on_data(std::function<void(const sim::Packet&)> fn) {
    on_data_ = std::move(fn);
  }

  std::uint64_t received_bytes() const { return received_bytes_; }
  std::uint64_t received_packets() const { return received_packets_; }
  std::uint64_t acks_sent() const { return acks_sent_; }

 private:
  void flush();

  sim::Network& net_;
  sim::RouteId ack_route_;
  std::uint64_t flow_tag_;
  FeedbackPolicy policy_;
  std::function<void(const sim::Packet&)> on_data_;

  std::vector<std::uint64_t> batch_;
  std::uint32_t batch_marked_ = 0;
  std::optional<sim::EventId> flush_timer_;
  bool have_highest_ = false;
  std::uint64_t highest_seen_ = 0;
  Seconds highest_sent_at_ = 0.0;
  Seconds highest_arrival_ = 0.0;
  std::uint64_t received_bytes_ = 0;
  std::uint64_t received_packets_ = 0;
  std::uint64_t acks_sent_ = 0;
};

}  // namespace transport
