#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "core/congestion_manager.hpp"
#include "sim/network.hpp"

namespace transport {

using cm::Bytes;
using cm::Seconds;

class ConnectionClosed : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr std::uint32_t kTcpAckBytes = 40;

struct TcpReceiverConfig {
  bool delayed_ack = false;
  Seconds delayed_ack_timeout = 0.2;
};

/// Cumulative-ACK receiver with out-of-order buffering and optional delayed
/// ACKs (one per two segments or 200 ms). Echoes CE marks as ECE.
class TcpReceiver {
 public:
  TcpReceiver(sim::Network& net, sim::RouteId ack_route,
              std::uint64_t flow_tag, TcpReceiverConfig config = {});
  ~TcpReceiver();

  TcpReceiver(const TcpReceiver&) = delete;
  TcpReceiver& operator=(const TcpReceiver&) = delete;

  void on_packet(const sim::Packet& pkt);

  /// In-order bytes handed to the application.
  std::uint64_t delivered() const { return rcv_nxt_; }
  void set_on_deliver(std::function<void(std::uint64_t)> fn) {
    on_deliver_ = std::move(fn);
  }

 private:
  void send_ack(bool syn, Seconds echo);

  sim::Network& net_;
  sim::RouteId ack_route_;
  std::uint64_t flow_tag_;
  TcpReceiverConfig config_;
  std::uint64_t rcv_nxt_ = 0;
  std::map<std::uint64_t, std::uint32_t> out_of_order_;
  unsigned unacked_segments_ = 0;
  bool ece_pending_ = false;
  std::optional<sim::EventId> delack_timer_;
  std::function<void(std::uint64_t)> on_deliver_;
};

struct TcpSenderConfig {
  bool handshake = true;
  unsigned dupack_threshold = 3;
  Seconds initial_rto = 1.0;
  Seconds min_rto = 0.2;
  Seconds max_rto = 60.0;
};

/// TCP sender whose congestion control lives entirely in the congestion
/// manager. Keeps loss recovery (fast retransmit with NewReno partial-ACK
/// handling, RTO with Karn's rule and exponential backoff) and reports every
/// congestion signal through cm_update.
///
/// Every byte handed to cm_notify is eventually returned through the nsent
/// field of some cm_update, so the macroflow's outstanding count stays in
/// step with what this connection actually has in the network.
class TcpSender {
 public:
  TcpSender(cm::CongestionManager& manager, sim::Network& net,
            sim::RouteId route, cm::FlowId flow, TcpSenderConfig config = {});
  ~TcpSender();

  TcpSender(const TcpSender&) = delete;
  TcpSender& operator=(const TcpSender&) = delete;

  /// Sends the SYN (or becomes established at once without a handshake).
  void connect();
  /// Appends nbytes to the send buffer (tcp_write).
  void write(std::uint64_t nbytes);
  /// ACK processing (tcp_input).
  void on_packet(const sim::Packet& ack);
  /// Closes the CM flow once everything written has been acknowledged.
  void close();

  void set_on_all_acked(std::function<void()> fn) {
    on_all_acked_ = std::move(fn);
  }

  bool established() const { return established_; }
  bool closed() const { return closed_; }
  cm::FlowId flow() const { return flow_; }
  std::uint64_t snd_una() const { return snd_una_; }
  std::uint64_t snd_nxt() const { return snd_nxt_; }
  std::uint64_t snd_max() const { return snd_max_; }
  std::uint64_t written() const { return written_; }
  unsigned dup_acks() const { return dup_acks_; }
  const std::set<std::uint64_t>& rtx_queue() const { return rtx_queue_; }
  Seconds current_rto() const;
  Bytes charged() const { return charged_; }

  struct Counters {
    std::uint64_t segments_sent = 0;
    std::uint64_t retransmissions = 0;
    std::uint64_t grants = 0;
    std::uint64_t empty_grants = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t fast_retransmits = 0;
    std::uint64_t rtt_samples = 0;
    std::uint64_t rtt_samples_from_retransmits = 0;
  };
  const Counters& counters() const { return counters_; }

 private:
  void on_grant();
  void on_rto();
  void ensure_requests();
  void arm_rto();
  void restart_rto();
  void cancel_rto();
  void transmit(std::uint64_t seq, std::uint32_t len, bool retransmit);
  void report(cm::LossMode mode, Bytes nsent, Bytes nrecd,
              std::optional<Seconds> rtt);
  void maybe_finish();
  std::uint64_t wanted_grants() const;

  cm::CongestionManager& manager_;
  sim::Network& net_;
  sim::RouteId route_;
  cm::FlowId flow_;
  TcpSenderConfig config_;
  std::uint32_t mss_;

  bool established_ = false;
  bool closing_ = false;
  bool closed_ = false;
  Seconds syn_sent_at_ = 0.0;

  std::uint64_t written_ = 0;
  std::uint64_t snd_una_ = 0;
  std::uint64_t snd_nxt_ = 0;
  std::uint64_t snd_max_ = 0;
  unsigned dup_acks_ = 0;
  bool in_recovery_ = false;
  std::uint64_t recover_ = 0;
  std::set<std::uint64_t> rtx_queue_;
  Bytes charged_ = 0;
  std::uint64_t requests_in_flight_ = 0;

  bool timing_ = false;
  std::uint64_t timed_end_ = 0;
  Seconds timed_at_ = 0.0;

  unsigned backoff_ = 0;
  std::optional<sim::EventId> rto_timer_;
  std::function<void()> on_all_acked_;
  Counters counters_;
};

}  // namespace transport
