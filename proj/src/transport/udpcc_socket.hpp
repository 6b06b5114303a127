#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>

#include "core/congestion_manager.hpp"
#include "sim/network.hpp"
#include "transport/datagram_feedback.hpp"

namespace transport {

class SocketClosed : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct UdpCcConfig {
  /// Packets the socket buffers before send() refuses (0 = unbounded).
  std::size_t queue_limit = 0;
  FeedbackLoopConfig feedback;
};

/// Congestion-controlled datagram socket: a send queue drained one packet per
/// CM grant, with application acknowledgements fed back through cm_update.
class UdpCcSocket {
 public:
  UdpCcSocket(cm::CongestionManager& manager, sim::Network& net,
              sim::RouteId route, cm::FlowId flow, UdpCcConfig config = {});
  ~UdpCcSocket();

  UdpCcSocket(const UdpCcSocket&) = delete;
  UdpCcSocket& operator=(const UdpCcSocket&) = delete;

  /// Queues one datagram and requests a grant for it. Returns false when the
  /// socket buffer is full. Throws SocketClosed after close().
  bool send(std::uint32_t len, sim::PayloadMeta meta = {});

  /// Processes an AppAck from the receiver (udpcc_feedback).
  void on_feedback(const sim::Packet& appack);

  void close();

  /// Invoked after each datagram leaves the socket.
  void set_on_transmit(std::function<void(const sim::Packet&)> fn) {
    on_transmit_ = std::move(fn);
  }

  cm::FlowId flow() const { return flow_; }
  std::size_t queue_length() const { return queue_.size(); }
  std::uint64_t sent_packets() const { return next_seq_; }
  std::uint64_t updates_issued() const { return feedback_.updates_issued(); }
  std::uint64_t empty_grants() const { return empty_grants_; }

 private:
  struct Pending {
    std::uint32_t len;
    sim::PayloadMeta meta;
  };

  void on_grant();
  void ensure_requests();

  cm::CongestionManager& manager_;
  sim::Network& net_;
  sim::RouteId route_;
  cm::FlowId flow_;
  UdpCcConfig config_;
  bool open_ = true;

  std::deque<Pending> queue_;
  std::uint64_t requests_in_flight_ = 0;
  std::uint64_t next_seq_ = 0;
  FeedbackLoop feedback_;
  std::function<void(const sim::Packet&)> on_transmit_;
  std::uint64_t empty_grants_ = 0;
};

}  // namespace transport
