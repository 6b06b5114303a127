#pragma once

#include <optional>

#include "apps/layers.hpp"
#include "transport/udpcc_socket.hpp"

namespace apps {

struct RateSourceConfig {
  LayerConfig layers;
  double thresh_down = 0.7;
  double thresh_up = 1.4;
  /// Datagram size; 0 means the flow's MTU.
  std::uint32_t packet_size = 0;
  transport::UdpCcConfig socket{.queue_limit = 32, .feedback = {}};
};

/// Layered source built on rate callbacks: sends on its own clock at the
/// current layer's rate through a UDP-CC socket and re-picks the layer only
/// when the CM reports a rate change past its thresholds.
class RateSource {
 public:
  RateSource(cm::CongestionManager& manager, sim::Network& net,
             sim::RouteId route, cm::FlowId flow, RateSourceConfig config = {});
  ~RateSource();

  RateSource(const RateSource&) = delete;
  RateSource& operator=(const RateSource&) = delete;

  void start();
  void stop();
  void on_feedback(const sim::Packet& appack) { socket_.on_feedback(appack); }

  /// cmapp_update handler.
  void on_rate(double rate);

  int layer() const { return layer_; }
  std::uint64_t layer_changes() const { return layer_changes_; }
  std::uint64_t refused_packets() const { return refused_; }
  Seconds send_period() const;

 private:
  void tick();

  cm::CongestionManager& manager_;
  sim::Network& net_;
  cm::FlowId flow_;
  RateSourceConfig config_;
  transport::UdpCcSocket socket_;
  std::uint32_t packet_size_;
  int layer_ = 0;
  std::uint64_t layer_changes_ = 0;
  std::uint64_t next_frame_ = 0;
  std::uint64_t refused_ = 0;
  std::optional<sim::EventId> timer_;
};

}  // namespace apps
