#pragma once

#include "apps/layers.hpp"
#include "core/congestion_manager.hpp"
#include "sim/network.hpp"
#include "transport/datagram_feedback.hpp"

namespace apps {

struct AlfConfig {
  LayerConfig layers;
  /// Issue the next cm_request before cm_notify instead of after.
  bool request_before_notify = false;
  transport::FeedbackLoopConfig feedback;
};

/// Layered source built on request/callback: every grant queries the CM,
/// picks the layer the current rate supports, sends one MTU tagged with it
/// and asks for the next grant straight away.
class AlfSource {
 public:
  AlfSource(cm::CongestionManager& manager, sim::Network& net,
            sim::RouteId route, cm::FlowId flow, AlfConfig config = {});

  AlfSource(const AlfSource&) = delete;
  AlfSource& operator=(const AlfSource&) = delete;

  void start();
  void stop();
  void on_feedback(const sim::Packet& appack) { feedback_.on_feedback(appack); }

  int layer() const { return layer_; }
  std::uint64_t layer_changes() const { return layer_changes_; }
  std::uint64_t packets_sent() const { return next_seq_; }

 private:
  void on_grant();

  cm::CongestionManager& manager_;
  sim::Network& net_;
  sim::RouteId route_;
  cm::FlowId flow_;
  AlfConfig config_;
  std::uint32_t packet_size_;
  transport::FeedbackLoop feedback_;
  bool running_ = false;
  int layer_ = -1;
  std::uint64_t layer_changes_ = 0;
  std::uint64_t next_seq_ = 0;
};

}  // namespace apps
