#include "harness/experiment.hpp"

#include <fstream>
#include <map>
#include <memory>

#include "apps/alf_source.hpp"
#include "apps/greedy_sender.hpp"
#include "apps/rate_source.hpp"
#include "apps/vat.hpp"
#include "harness/reference_tcp.hpp"
#include "harness/summary.hpp"
#include "transport/tcp.hpp"
#include "transport/udpcc_socket.hpp"

namespace harness {

namespace {

constexpr cm::HostId kSenderHost = 1;
constexpr cm::HostId kReceiverHost = 2;

class TraceObserver final : public cm::ManagerObserver {
 public:
  TraceObserver(sim::Network& net, cm::Bytes mtu) : net_(net), mtu_(mtu) {}

  void on_grant(cm::FlowId flow, cm::MacroflowId mf) override {
    net_.emit(flow.value, sim::TraceKind::Grant, static_cast<double>(mtu_),
              static_cast<double>(mf.value));
  }
  void on_window_change(cm::MacroflowId mf, cm::Bytes cwnd,
                        cm::Bytes ssthresh) override {
    net_.emit(mf.value, sim::TraceKind::CwndChange, static_cast<double>(cwnd),
              static_cast<double>(ssthresh));
  }
  void on_rate_callback(cm::FlowId flow, double rate, cm::Seconds srtt) override {
    net_.emit(flow.value, sim::TraceKind::RateCallback, rate, srtt);
  }

 private:
  sim::Network& net_;
  cm::Bytes mtu_;
};

/// Sender host and receiver host joined by the bottleneck and a reverse
/// link. Each host hands arriving packets to the handler registered for the
/// packet's flow.
class Testbed {
 public:
  explicit Testbed(const ExperimentConfig& config)
      : config_(config),
        net_(sim_, config.seed, &trace_),
        manager_(manager_config(config), [this] { return sim_.now(); }),
        observer_(net_, config.link.mtu) {
    manager_.set_observer(&observer_);
    fwd_ = net_.add_link(to_link_config(config.link));
    rev_ = net_.add_link(to_link_config(config.reverse_link));
    sender_host_ = net_.add_endpoint(
        [this](const sim::Packet& p) { dispatch(sender_handlers_, p); });
    receiver_host_ = net_.add_endpoint(
        [this](const sim::Packet& p) { dispatch(receiver_handlers_, p); });
    data_route_ = net_.add_route({fwd_}, receiver_host_);
    ack_route_ = net_.add_route({rev_}, sender_host_);

    for (const BandwidthStep& step : config.bandwidth_schedule) {
      const double bps = step.bandwidth_bps;
      sim_.schedule(step.at, [this, bps] { net_.link(fwd_).set_bandwidth(bps); });
    }
    tick();
  }

  static cm::ManagerConfig manager_config(const ExperimentConfig& c) {
    cm::ManagerConfig m;
    m.default_mtu = c.link.mtu;
    m.initial_window_mtus = c.cm.initial_window_mtus;
    m.initial_ssthresh = c.cm.initial_ssthresh;
    m.grant_lease = c.cm.grant_lease;
    m.idle_rto_multiple = c.cm.idle_rto_multiple;
    m.linger_macroflows = c.cm.linger_macroflows;
    m.max_tick_period = c.cm.max_tick_period;
    m.batched_callbacks =
        c.scenario == Scenario::FairnessEnsemble && c.ensemble.bulk;
    return m;
  }

  cm::FlowId open(std::uint16_t port, cm::Protocol proto) {
    return manager_.open(
        cm::FlowKey{kSenderHost, port, kReceiverHost, 80, proto});
  }

  void at_sender(std::uint64_t flow, sim::PacketHandler h) {
    sender_handlers_[flow] = std::move(h);
  }
  void at_receiver(std::uint64_t flow, sim::PacketHandler h) {
    receiver_handlers_[flow] = std::move(h);
  }

  RunResult finish() {
    net_.run_until(config_.duration);
    RunResult r;
    r.config = config_;
    r.trace = trace_.records();
    r.operations = manager_.counters();
    return r;
  }

  transport::FeedbackPolicy feedback_policy() const {
    return {config_.feedback.batch_packets, config_.feedback.batch_timeout};
  }
  transport::FeedbackLoopConfig feedback_loop() const {
    transport::FeedbackLoopConfig f;
    f.feedback_delay = config_.feedback.batch_timeout;
    return f;
  }

  sim::Simulator& sim() { return sim_; }
  sim::Network& net() { return net_; }
  cm::CongestionManager& manager() { return manager_; }
  sim::LinkId fwd() const { return fwd_; }
  sim::RouteId data_route() const { return data_route_; }
  sim::RouteId ack_route() const { return ack_route_; }
  sim::EndpointId sender_host() const { return sender_host_; }
  sim::EndpointId receiver_host() const { return receiver_host_; }

 private:
  using Handlers = std::map<std::uint64_t, sim::PacketHandler>;

  static void dispatch(Handlers& handlers, const sim::Packet& p) {
    if (auto it = handlers.find(p.flow); it != handlers.end()) it->second(p);
  }

  void tick() {
    manager_.scheduler_tick(sim_.now());
    sim_.schedule_in(manager_.tick_period(), [this] { tick(); });
  }

  const ExperimentConfig& config_;
  sim::Simulator sim_;
  sim::VectorTrace trace_;
  sim::Network net_;
  cm::CongestionManager manager_;
  TraceObserver observer_;
  sim::LinkId fwd_ = 0, rev_ = 0;
  sim::EndpointId sender_host_ = 0, receiver_host_ = 0;
  sim::RouteId data_route_ = 0, ack_route_ = 0;
  Handlers sender_handlers_, receiver_handlers_;
};

/// Keeps a bulk TCP sender's buffer topped up.
class BulkWriter {
 public:
  static constexpr std::uint64_t kChunk = 256 * 1024;
  explicit BulkWriter(transport::TcpSender& s) : sender_(s) { top_up(); }
  void top_up() {
    if (sender_.written() - sender_.snd_una() < kChunk) sender_.write(kChunk);
  }

 private:
  transport::TcpSender& sender_;
};

transport::TcpSenderConfig tcp_sender_config(const ExperimentConfig& c) {
  transport::TcpSenderConfig t;
  t.handshake = c.tcp.handshake;
  return t;
}

transport::TcpReceiverConfig tcp_receiver_config(const ExperimentConfig& c) {
  transport::TcpReceiverConfig t;
  t.delayed_ack = c.tcp.delayed_ack;
  return t;
}

RunResult run_tcp_compare(const ExperimentConfig& c) {
  Testbed bed(c);
  auto& net = bed.net();

  const cm::FlowId flow = bed.open(5001, cm::Protocol::Tcp);
  transport::TcpSender sender(bed.manager(), net, bed.data_route(), flow,
                              tcp_sender_config(c));
  transport::TcpReceiver receiver(net, bed.ack_route(), flow.value,
                                  tcp_receiver_config(c));
  BulkWriter writer(sender);
  bed.at_receiver(flow.value, [&](const sim::Packet& p) { receiver.on_packet(p); });
  bed.at_sender(flow.value, [&](const sim::Packet& p) {
    sender.on_packet(p);
    writer.top_up();
  });

  // The reference connection gets its own copy of the path so the two never
  // compete; only the loss process is shared in distribution.
  const sim::LinkId ref_fwd = net.add_link(to_link_config(c.link));
  const sim::LinkId ref_rev = net.add_link(to_link_config(c.reverse_link));
  const sim::RouteId ref_data = net.add_route({ref_fwd}, bed.receiver_host());
  const sim::RouteId ref_acks = net.add_route({ref_rev}, bed.sender_host());
  ReferenceTcpConfig ref_config;
  ref_config.mss = c.link.mtu;
  ReferenceTcpSender ref_sender(net, ref_data, kReferenceFlowBase, ref_config);
  ReferenceTcpReceiver ref_receiver(net, ref_acks, kReferenceFlowBase);
  bed.at_receiver(kReferenceFlowBase,
                  [&](const sim::Packet& p) { ref_receiver.on_packet(p); });
  bed.at_sender(kReferenceFlowBase,
                [&](const sim::Packet& p) { ref_sender.on_packet(p); });

  sender.connect();
  ref_sender.start();
  return bed.finish();
}

RunResult run_sharing(const ExperimentConfig& c) {
  Testbed bed(c);
  auto& net = bed.net();

  struct Transfer {
    std::unique_ptr<transport::TcpSender> sender;
    std::unique_ptr<transport::TcpReceiver> receiver;
    double started = 0.0;
    bool done = false;
  };
  std::vector<std::unique_ptr<Transfer>> transfers;
  std::function<void()> start_next;

  start_next = [&] {
    if (transfers.size() >= c.sharing.transfers) return;
    auto t = std::make_unique<Transfer>();
    Transfer* tr = t.get();
    const auto port = static_cast<std::uint16_t>(6000 + transfers.size());
    const cm::FlowId flow = bed.open(port, cm::Protocol::Tcp);
    tr->sender = std::make_unique<transport::TcpSender>(
        bed.manager(), net, bed.data_route(), flow, tcp_sender_config(c));
    tr->receiver = std::make_unique<transport::TcpReceiver>(
        net, bed.ack_route(), flow.value, tcp_receiver_config(c));
    tr->started = net.sim().now();
    tr->receiver->set_on_deliver([&, tr, flow](std::uint64_t delivered) {
      if (tr->done || delivered < c.sharing.transfer_bytes) return;
      tr->done = true;
      const double elapsed = net.sim().now() - tr->started;
      net.emit(flow.value, sim::TraceKind::TransferDone,
               static_cast<double>(c.sharing.transfer_bytes), elapsed);
      tr->sender->close();
      net.sim().schedule_in(c.sharing.gap, [&] { start_next(); });
    });
    bed.at_receiver(flow.value,
                    [tr](const sim::Packet& p) { tr->receiver->on_packet(p); });
    bed.at_sender(flow.value,
                  [tr](const sim::Packet& p) { tr->sender->on_packet(p); });
    transfers.push_back(std::move(t));
    tr->sender->write(c.sharing.transfer_bytes);
    tr->sender->connect();
  };

  start_next();
  return bed.finish();
}

template <class Source>
RunResult run_datagram_source(const ExperimentConfig& c) {
  Testbed bed(c);
  auto& net = bed.net();
  const cm::FlowId flow = bed.open(7000, cm::Protocol::Udp);
  transport::DatagramReceiver receiver(net, bed.ack_route(), flow.value,
                                       bed.feedback_policy());

  std::unique_ptr<Source> source;
  if constexpr (std::is_same_v<Source, apps::AlfSource>) {
    apps::AlfConfig a;
    a.layers = c.layers.to_layers();
    a.request_before_notify = c.alf.request_before_notify;
    a.feedback = bed.feedback_loop();
    source = std::make_unique<Source>(bed.manager(), net, bed.data_route(),
                                      flow, a);
  } else {
    apps::RateSourceConfig r;
    r.layers = c.layers.to_layers();
    r.thresh_down = c.rate_app.thresh_down;
    r.thresh_up = c.rate_app.thresh_up;
    r.socket.queue_limit = c.rate_app.queue_limit;
    r.socket.feedback = bed.feedback_loop();
    source = std::make_unique<Source>(bed.manager(), net, bed.data_route(),
                                      flow, r);
  }
  bed.at_receiver(flow.value, [&](const sim::Packet& p) { receiver.on_packet(p); });
  bed.at_sender(flow.value, [&](const sim::Packet& p) { source->on_feedback(p); });
  source->start();
  return bed.finish();
}

RunResult run_fairness_ensemble(const ExperimentConfig& c) {
  Testbed bed(c);
  auto& net = bed.net();

  std::unique_ptr<apps::CallBatcher> batcher;
  if (c.ensemble.bulk) batcher = std::make_unique<apps::CallBatcher>(bed.manager());

  std::vector<std::unique_ptr<apps::GreedySender>> senders;
  std::vector<std::unique_ptr<transport::DatagramReceiver>> receivers;
  for (std::uint32_t i = 0; i < c.ensemble.flows; ++i) {
    const cm::FlowId flow =
        bed.open(static_cast<std::uint16_t>(8000 + i), cm::Protocol::Udp);
    auto& s = senders.emplace_back(std::make_unique<apps::GreedySender>(
        bed.manager(), net, bed.data_route(), flow, batcher.get(),
        bed.feedback_loop()));
    auto& r = receivers.emplace_back(std::make_unique<transport::DatagramReceiver>(
        net, bed.ack_route(), flow.value, bed.feedback_policy()));
    bed.at_receiver(flow.value,
                    [rp = r.get()](const sim::Packet& p) { rp->on_packet(p); });
    bed.at_sender(flow.value,
                  [sp = s.get()](const sim::Packet& p) { sp->on_feedback(p); });
  }

  ReferenceTcpConfig ref_config;
  ref_config.mss = c.link.mtu;
  ReferenceTcpSender ref_sender(net, bed.data_route(), kReferenceFlowBase,
                                ref_config);
  ReferenceTcpReceiver ref_receiver(net, bed.ack_route(), kReferenceFlowBase);
  bed.at_receiver(kReferenceFlowBase,
                  [&](const sim::Packet& p) { ref_receiver.on_packet(p); });
  bed.at_sender(kReferenceFlowBase,
                [&](const sim::Packet& p) { ref_sender.on_packet(p); });

  for (auto& s : senders) s->start();
  ref_sender.start();
  RunResult r = bed.finish();
  for (auto& s : senders) s->stop();
  return r;
}

RunResult run_udpcc_basic(const ExperimentConfig& c) {
  Testbed bed(c);
  auto& net = bed.net();
  const std::uint32_t size = c.link.mtu;

  std::vector<std::unique_ptr<transport::UdpCcSocket>> sockets;
  std::vector<std::unique_ptr<transport::DatagramReceiver>> receivers;
  for (std::uint32_t i = 0; i < c.udpcc.flows; ++i) {
    const cm::FlowId flow =
        bed.open(static_cast<std::uint16_t>(9000 + i), cm::Protocol::Udp);
    transport::UdpCcConfig sc;
    sc.feedback = bed.feedback_loop();
    auto& s = sockets.emplace_back(std::make_unique<transport::UdpCcSocket>(
        bed.manager(), net, bed.data_route(), flow, sc));
    auto& r = receivers.emplace_back(std::make_unique<transport::DatagramReceiver>(
        net, bed.ack_route(), flow.value, bed.feedback_policy()));
    bed.at_receiver(flow.value,
                    [rp = r.get()](const sim::Packet& p) { rp->on_packet(p); });
    bed.at_sender(flow.value,
                  [sp = s.get()](const sim::Packet& p) { sp->on_feedback(p); });
    // Every departure is replaced at once, so the socket never runs dry.
    s->set_on_transmit([sp = s.get(), size](const sim::Packet&) {
      sp->send(size);
    });
  }
  for (auto& s : sockets)
    for (std::uint32_t k = 0; k < c.udpcc.queue_depth; ++k) s->send(size);
  return bed.finish();
}

RunResult run_vat(const ExperimentConfig& c) {
  Testbed bed(c);
  auto& net = bed.net();
  const cm::FlowId flow = bed.open(7100, cm::Protocol::Udp);
  transport::DatagramReceiver receiver(net, bed.ack_route(), flow.value,
                                       bed.feedback_policy());
  apps::VatConfig v;
  v.bitrate_bps = c.vat.bitrate_bps;
  v.frame_interval = c.vat.frame_interval;
  v.app_buf_limit = c.vat.app_buf_limit;
  v.policer_depth_frames = c.vat.policer_depth_frames;
  v.thresh_down = c.vat.thresh_down;
  v.thresh_up = c.vat.thresh_up;
  v.feedback = bed.feedback_loop();
  apps::VatSource source(bed.manager(), net, bed.data_route(), flow, v);
  bed.at_receiver(flow.value, [&](const sim::Packet& p) { receiver.on_packet(p); });
  bed.at_sender(flow.value, [&](const sim::Packet& p) { source.on_feedback(p); });
  source.start();
  return bed.finish();
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  RunResult result;
  switch (config.scenario) {
    case Scenario::TcpCompare:
      result = run_tcp_compare(config);
      break;
    case Scenario::Sharing:
      result = run_sharing(config);
      break;
    case Scenario::LayeredAlf:
      result = run_datagram_source<apps::AlfSource>(config);
      break;
    case Scenario::LayeredRate:
    case Scenario::DelayedFeedback:
      result = run_datagram_source<apps::RateSource>(config);
      break;
    case Scenario::FairnessEnsemble:
      result = run_fairness_ensemble(config);
      break;
    case Scenario::UdpccBasic:
      result = run_udpcc_basic(config);
      break;
    case Scenario::Vat:
      result = run_vat(config);
      break;
  }
  result.summary = summarize(config, result.trace);
  result.summary["operations"] = operations_json(result.operations, result.trace);
  return result;
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("trace.csv");
    sim::write_csv(out, result.trace);
  }
  {
    auto out = open("summary.json");
    out << result.summary.dump(2) << '\n';
  }
  {
    auto out = open("config.json");
    out << to_json(result.config).dump(2) << '\n';
  }
}

}  // namespace harness
