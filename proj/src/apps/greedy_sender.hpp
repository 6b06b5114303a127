#pragma once

#include <vector>

#include "core/congestion_manager.hpp"
#include "sim/network.hpp"
#include "transport/datagram_feedback.hpp"

namespace apps {

/// Collects the cm_notify and cm_request calls made while a dispatch batch
/// runs and issues them as one cm_bulk_notify and one cm_bulk_request when
/// the batch ends. The manager sees the same state at its next scheduling
/// decision as with per-flow calls.
class CallBatcher {
 public:
  explicit CallBatcher(cm::CongestionManager& manager);
  ~CallBatcher();

  CallBatcher(const CallBatcher&) = delete;
  CallBatcher& operator=(const CallBatcher&) = delete;

  void notify(cm::FlowId flow, cm::Bytes nsent);
  void request(cm::FlowId flow);
  void flush();

 private:
  cm::CongestionManager& manager_;
  std::vector<cm::FlowId> notify_flows_;
  std::vector<cm::Bytes> notify_bytes_;
  std::vector<cm::FlowId> request_flows_;
};

/// Request/callback datagram sender with unbounded demand: every grant sends
/// one MTU and asks for the next.
class GreedySender {
 public:
  GreedySender(cm::CongestionManager& manager, sim::Network& net,
               sim::RouteId route, cm::FlowId flow,
               CallBatcher* batcher = nullptr,
               transport::FeedbackLoopConfig feedback = {});

  GreedySender(const GreedySender&) = delete;
  GreedySender& operator=(const GreedySender&) = delete;

  void start();
  void stop();
  void on_feedback(const sim::Packet& appack) { feedback_.on_feedback(appack); }

  cm::FlowId flow() const { return flow_; }
  std::uint64_t packets_sent() const { return next_seq_; }

 private:
  void on_grant();

  cm::CongestionManager& manager_;
  sim::Network& net_;
  sim::RouteId route_;
  cm::FlowId flow_;
  CallBatcher* batcher_;
  std::uint32_t packet_size_;
  transport::FeedbackLoop feedback_;
  bool running_ = false;
  std::uint64_t next_seq_ = 0;
};

}  // namespace apps
