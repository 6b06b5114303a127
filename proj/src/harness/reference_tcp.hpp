#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "harness/config.hpp"
#include "sim/network.hpp"

namespace harness {

struct ReferenceTcpConfig {
  std::uint32_t mss = 1500;
  double initial_window = 2.0;  // segments
  std::uint64_t initial_ssthresh = 64 * 1024;
  double initial_rto = 1.0;
  double min_rto = 0.2;
  double max_rto = 60.0;
};

/// Bulk-transfer Reno sender with NewReno partial-ACK recovery. Windowing is
/// its own (packet counting, window inflation during fast recovery); it
/// shares nothing with the congestion manager.
class ReferenceTcpSender {
 public:
  ReferenceTcpSender(sim::Network& net, sim::RouteId route,
                     std::uint64_t flow_tag, ReferenceTcpConfig config = {});
  ~ReferenceTcpSender();

  ReferenceTcpSender(const ReferenceTcpSender&) = delete;
  ReferenceTcpSender& operator=(const ReferenceTcpSender&) = delete;

  void start();
  void on_packet(const sim::Packet& ack);

  double cwnd() const { return cwnd_; }
  std::uint64_t acked_bytes() const { return snd_una_; }
  std::uint64_t timeouts() const { return timeouts_; }

 private:
  void send_data();
  void transmit(std::uint64_t seq);
  void arm_timer(bool restart);
  void on_timeout();
  double rto() const;
  double flight_segments() const;

  sim::Network& net_;
  sim::RouteId route_;
  std::uint64_t flow_;
  ReferenceTcpConfig config_;

  std::uint64_t snd_una_ = 0;
  std::uint64_t snd_nxt_ = 0;
  std::uint64_t snd_max_ = 0;
  double cwnd_;
  double ssthresh_;
  unsigned dupacks_ = 0;
  bool in_recovery_ = false;
  std::uint64_t recover_ = 0;

  std::optional<double> srtt_;
  double rttvar_ = 0.0;
  unsigned backoff_ = 0;
  bool timing_ = false;
  std::uint64_t timed_seq_ = 0;
  double timed_at_ = 0.0;
  std::optional<sim::EventId> timer_;
  std::uint64_t timeouts_ = 0;
};

/// Cumulative ACK for every data segment, echoing the segment's timestamp.
class ReferenceTcpReceiver {
 public:
  ReferenceTcpReceiver(sim::Network& net, sim::RouteId ack_route,
                       std::uint64_t flow_tag);
  void on_packet(const sim::Packet& pkt);
  std::uint64_t delivered() const { return rcv_nxt_; }

 private:
  sim::Network& net_;
  sim::RouteId ack_route_;
  std::uint64_t flow_;
  std::uint64_t rcv_nxt_ = 0;
  std::map<std::uint64_t, std::uint32_t> out_of_order_;
};

struct ReferenceTcpResult {
  double throughput_bps = 0.0;  // in-order bytes delivered per second, in bits
  std::uint64_t delivered_bytes = 0;
  std::uint64_t timeouts = 0;
};

/// Runs one reference connection alone over a forward/reverse link pair for
/// `duration` virtual seconds.
ReferenceTcpResult oracle_reference_tcp(const LinkParams& forward,
                                        const LinkParams& reverse,
                                        double duration, std::uint64_t seed);

sim::LinkConfig to_link_config(const LinkParams& params);

}  // namespace harness
