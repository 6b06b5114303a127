#include "apps/greedy_sender.hpp"

namespace apps {

CallBatcher::CallBatcher(cm::CongestionManager& manager) : manager_(manager) {
  manager_.set_batch_end_hook([this] { flush(); });
}

CallBatcher::~CallBatcher() { manager_.set_batch_end_hook({}); }

void CallBatcher::notify(cm::FlowId flow, cm::Bytes nsent) {
  notify_flows_.push_back(flow);
  notify_bytes_.push_back(nsent);
}

void CallBatcher::request(cm::FlowId flow) { request_flows_.push_back(flow); }

void CallBatcher::flush() {
  if (!notify_flows_.empty()) {
    const auto flows = std::move(notify_flows_);
    const auto bytes = std::move(notify_bytes_);
    notify_flows_.clear();
    notify_bytes_.clear();
    manager_.bulk_notify(flows, bytes);
  }
  if (!request_flows_.empty()) {
    const auto flows = std::move(request_flows_);
    request_flows_.clear();
    manager_.bulk_request(flows);
  }
}

GreedySender::GreedySender(cm::CongestionManager& manager, sim::Network& net,
                           sim::RouteId route, cm::FlowId flow,
                           CallBatcher* batcher,
                           transport::FeedbackLoopConfig feedback)
    : manager_(manager), net_(net), route_(route), flow_(flow),
      batcher_(batcher),
      packet_size_(static_cast<std::uint32_t>(manager.mtu(flow))),
      feedback_(manager, net, flow, feedback) {
  manager_.register_send(flow_, [this](cm::FlowId) { on_grant(); });
}

void GreedySender::start() {
  if (running_) return;
  running_ = true;
  manager_.request(flow_);
}

void GreedySender::stop() {
  running_ = false;
  feedback_.stop();
}

void GreedySender::on_grant() {
  if (!running_) {
    if (batcher_)
      batcher_->notify(flow_, 0);
    else
      manager_.notify(flow_, 0);
    return;
  }
  sim::Packet pkt;
  pkt.flow = flow_.value;
  pkt.seq = next_seq_++;
  pkt.len = packet_size_;
  pkt.sent_at = net_.sim().now();
  net_.emit(pkt.flow, sim::TraceKind::Send, static_cast<double>(pkt.seq),
            pkt.len);
  feedback_.on_sent(pkt.seq, pkt.len);
  net_.send(pkt, route_);
  if (batcher_) {
    batcher_->notify(flow_, packet_size_);
    batcher_->request(flow_);
  } else {
    manager_.notify(flow_, packet_size_);
    manager_.request(flow_);
  }
}

}  // namespace apps
