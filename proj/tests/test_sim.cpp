#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "sim/network.hpp"

using namespace sim;

TEST_CASE("events at the same instant fire in scheduling order") {
  Simulator s;
  std::vector<char> order;
  s.schedule(1.0, [&] { order.push_back('A'); });
  s.schedule(1.0, [&] { order.push_back('B'); });
  s.schedule(0.5, [&] { order.push_back('C'); });
  s.run_until(2.0);
  CHECK(order == std::vector<char>{'C', 'A', 'B'});
  CHECK(s.now() == 2.0);
}

TEST_CASE("event scheduled at now fires before the clock advances") {
  Simulator s;
  double seen = -1;
  s.schedule(1.0, [&] { s.schedule(s.now(), [&] { seen = s.now(); }); });
  s.run_until(5.0);
  CHECK(seen == 1.0);
}

TEST_CASE("scheduling in the past throws") {
  Simulator s;
  s.run_until(1.0);
  CHECK_THROWS_AS(s.schedule(1.0 - 1e-9, [] {}), PastTime);
}

TEST_CASE("cancelled events do not fire") {
  Simulator s;
  int fired = 0;
  const EventId id = s.schedule(1.0, [&] { ++fired; });
  CHECK(s.is_pending(id));
  s.cancel(id);
  s.run_until(2.0);
  CHECK(fired == 0);
  CHECK_FALSE(s.is_pending(id));
}

TEST_CASE("run_until with no events just advances the clock") {
  Simulator s;
  Network net(s, 1);
  const SimStats stats = net.run_until(3.0);
  CHECK(stats.flows.empty());
  CHECK(s.now() == 3.0);
}

TEST_CASE("empty 10 Mbps link delivers 1500 B after 1.2 ms plus delay") {
  Link link(0, LinkConfig{}, 1);
  Packet p;
  p.len = 1500;
  const auto adm = link.enqueue(p, 2.0);
  CHECK(adm.result == EnqueueResult::Queued);
  CHECK(adm.delivery_time == doctest::Approx(2.0 + 0.0012 + 0.030));
}

TEST_CASE("drop-tail: queue_limit 1 drops the second arrival") {
  LinkConfig cfg;
  cfg.queue_limit = 1;
  Link link(0, cfg, 1);
  Packet p;
  p.len = 1500;
  CHECK(link.enqueue(p, 0.0).result == EnqueueResult::Queued);
  CHECK(link.enqueue(p, 0.0).result == EnqueueResult::Dropped);
  CHECK(link.enqueue(p, 0.0013).result == EnqueueResult::Queued);
}

TEST_CASE("ECN mode marks instead of dropping") {
  LinkConfig cfg;
  cfg.loss_prob = 1.0;
  cfg.ecn = true;
  Link link(0, cfg, 1);
  Packet p;
  p.len = 100;
  const auto adm = link.enqueue(p, 0.0);
  CHECK(adm.result == EnqueueResult::Marked);
  CHECK(p.ecn_marked);
}

TEST_CASE("oversized data packet is rejected") {
  LinkConfig cfg;
  cfg.mtu = 576;
  Link link(0, cfg, 1);
  Packet p;
  p.len = 1500;
  CHECK_THROWS_AS(link.enqueue(p, 0.0), std::invalid_argument);
  p.kind = PacketKind::Ack;
  CHECK_NOTHROW(link.enqueue(p, 0.0));
}

TEST_CASE("link streams are independent of how many links exist") {
  LinkConfig cfg;
  cfg.loss_prob = 0.5;
  auto pattern = [&](int extra_links) {
    Simulator s;
    Network net(s, 42);
    for (int i = 0; i < extra_links; ++i) net.add_link(cfg);
    std::vector<int> out;
    Link& l = net.link(0);
    Packet p;
    p.len = 10;
    for (int i = 0; i < 64; ++i)
      out.push_back(l.enqueue(p, i * 1.0).result == EnqueueResult::Dropped);
    return out;
  };
  CHECK(pattern(1) == pattern(5));
}

namespace {
// Constant-rate source injecting one 1500 B packet every `gap` seconds.
struct Pump {
  Network& net;
  RouteId route;
  std::uint64_t flow;
  double gap;
  double until;
  std::uint64_t seq = 0;
  void start() { tick(); }
  void tick() {
    if (net.sim().now() >= until) return;
    Packet p;
    p.flow = flow;
    p.seq = seq++;
    p.len = 1500;
    p.sent_at = net.sim().now();
    net.send(p, route);
    net.sim().schedule_in(gap, [this] { tick(); });
  }
};
}  // namespace

TEST_CASE("saturating a 10 Mbps link for 10 s delivers its capacity") {
  Simulator s;
  Network net(s, 7);
  LinkConfig cfg;
  const LinkId l = net.add_link(cfg);
  std::uint64_t delivered = 0;
  const EndpointId sink =
      net.add_endpoint([&](const Packet& p) { delivered += p.len; });
  const RouteId r = net.add_route({l}, sink);
  Pump pump{net, r, 1, 0.0010, 10.0};  // offered 12 Mbps
  pump.start();
  net.run_until(10.0);
  // Closed form: the link is busy from t=0; bytes delivered by t_end are those
  // whose departure precedes t_end - prop_delay.
  const double expected = (10.0 - cfg.prop_delay) * cfg.bandwidth_bps / 8.0;
  CHECK(std::abs(static_cast<double>(delivered) - expected) <= 1500.0);
}

TEST_CASE("conservation and FIFO on a lossy queue") {
  Simulator s;
  VectorTrace trace;
  Network net(s, 3, &trace);
  LinkConfig cfg;
  cfg.loss_prob = 0.05;
  cfg.queue_limit = 10;
  const LinkId l = net.add_link(cfg);
  std::vector<std::uint64_t> arrivals;
  const EndpointId sink =
      net.add_endpoint([&](const Packet& p) { arrivals.push_back(p.seq); });
  const RouteId r = net.add_route({l}, sink);
  Pump pump{net, r, 9, 0.0009, 5.0};
  pump.start();
  const SimStats stats = net.run_until(5.01);
  const FlowStats& fs = stats.flows.at(9);
  CHECK(fs.injected_bytes ==
        fs.delivered_bytes + fs.dropped_bytes + fs.in_transit_bytes);
  CHECK(fs.dropped_packets > 0);
  CHECK(std::is_sorted(arrivals.begin(), arrivals.end()));
}

TEST_CASE("Bernoulli loss converges to loss_prob") {
  for (double p : {0.001, 0.01, 0.1, 0.5}) {
    LinkConfig cfg;
    cfg.loss_prob = p;
    cfg.bandwidth_bps = 1e12;
    Link link(0, cfg, 11);
    const int n = 200000;
    int dropped = 0;
    Packet pkt;
    pkt.len = 1;
    for (int i = 0; i < n; ++i)
      dropped += link.enqueue(pkt, i * 1.0).result == EnqueueResult::Dropped;
    const double frac = static_cast<double>(dropped) / n;
    CHECK(std::abs(frac - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("identical seed and config give identical traces") {
  auto run = [] {
    Simulator s;
    VectorTrace trace;
    Network net(s, 99, &trace);
    LinkConfig cfg;
    cfg.loss_prob = 0.02;
    const LinkId l = net.add_link(cfg);
    const EndpointId sink = net.add_endpoint({});
    const RouteId r = net.add_route({l}, sink);
    Pump pump{net, r, 1, 0.001, 2.0};
    pump.start();
    net.run_until(2.1);
    std::ostringstream out;
    write_csv(out, trace.records());
    return out.str();
  };
  CHECK(run() == run());
}

TEST_CASE("trace csv round-trips") {
  std::vector<TraceRecord> recs{
      {0.0, 1, TraceKind::Send, 0, 1500},
      {0.1234567890123, 2, TraceKind::CwndChange, 3000, 65536},
      {1e-7, 3, TraceKind::LayerChange, 2, 70000.5}};
  std::ostringstream out;
  write_csv(out, recs);
  CHECK(out.str().rfind("t,flow,kind,value1,value2\n", 0) == 0);
  std::istringstream in(out.str());
  CHECK(read_csv(in) == recs);
  std::istringstream bad("t,flow,kind,value1,value2\n1,2,Bogus,0,0\n");
  CHECK_THROWS(read_csv(bad));
}
