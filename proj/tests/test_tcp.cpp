#include <doctest.h>

#include <map>

#include "sim_fixture.hpp"
#include "transport/tcp.hpp"

using namespace transport;
using cm::Bytes;
using cm::LossMode;

namespace {
constexpr Bytes kMss = 1500;

cm::ManagerConfig window(Bytes mtus) {
  cm::ManagerConfig c;
  c.initial_window_mtus = mtus;
  return c;
}

// Sender under direct control: segments land in `wire`, ACKs are injected by
// hand. Links are fast so a few milliseconds flush everything.
struct Scripted {
  explicit Scripted(Bytes initial_mtus = 10)
      : fx(fast(), fast(), window(initial_mtus)),
        flow(fx.open(5000)),
        tcp(fx.manager, fx.net, fx.route, flow,
            TcpSenderConfig{.handshake = false}) {
    fx.net.set_handler(fx.receiver,
                       [this](const sim::Packet& p) { wire.push_back(p.seq); });
    tcp.connect();
  }
  static sim::LinkConfig fast() {
    sim::LinkConfig c;
    c.bandwidth_bps = 1e12;
    c.prop_delay = 0.0;
    c.queue_limit = 1000;
    return c;
  }
  void ack(std::uint64_t n, bool ece = false) {
    sim::Packet a;
    a.kind = sim::PacketKind::Ack;
    a.ack = n;
    a.ece = ece;
    tcp.on_packet(a);
  }
  void settle(double dt = 0.001) { fx.run(fx.sim_.now() + dt); }

  PathFixture fx;
  cm::FlowId flow;
  TcpSender tcp;
  std::vector<std::uint64_t> wire;
};
}  // namespace

TEST_CASE("write issues one request per MTU-sized chunk") {
  Scripted s(1);
  s.tcp.write(4500);
  const auto info = s.fx.manager.flow_info(s.flow);
  CHECK(info.grants + info.pending_requests == 3);
  s.tcp.write(0);
  const auto again = s.fx.manager.flow_info(s.flow);
  CHECK(again.grants + again.pending_requests == 3);
}

TEST_CASE("write with a closed window buffers until acks open it") {
  Scripted s(1);
  s.tcp.write(3 * kMss);
  s.settle();
  CHECK(s.wire == std::vector<std::uint64_t>{0});
  s.ack(kMss);
  s.settle();
  CHECK(s.wire == std::vector<std::uint64_t>{0, 1500, 3000});
}

TEST_CASE("new-data ack reports NoLoss with the acked byte count") {
  Scripted s;
  s.tcp.write(4 * kMss);
  s.settle();
  REQUIRE(s.wire.size() == 4);
  const Bytes before = s.fx.mf(s.flow).outstanding;
  const Bytes cwnd = s.fx.mf(s.flow).cwnd;
  s.ack(2 * kMss);
  CHECK(s.fx.mf(s.flow).outstanding == before - 3000);
  CHECK(s.fx.mf(s.flow).cwnd == cwnd + 3000);
  CHECK(s.tcp.snd_una() == 3000);
  CHECK(s.tcp.counters().rtt_samples == 1);
}

TEST_CASE("third dupack: transient, retransmission ahead of new data") {
  Scripted s;  // 10 MTU window
  s.tcp.write(12 * kMss);
  s.settle();
  REQUIRE(s.wire.size() == 10);
  s.wire.clear();
  s.ack(0);
  s.ack(0);
  CHECK(s.tcp.counters().fast_retransmits == 0);
  s.ack(0);
  CHECK(s.tcp.counters().fast_retransmits == 1);
  CHECK(s.fx.mf(s.flow).cwnd == 5 * kMss);
  CHECK(s.tcp.rtx_queue().count(0) == 1);
  // Later dupacks drain the window until a grant arrives: the
  // retransmission goes first, new data after it.
  for (int i = 0; i < 6 && s.wire.empty(); ++i) {
    s.ack(0);
    s.settle();
  }
  REQUIRE_FALSE(s.wire.empty());
  CHECK(s.wire.front() == 0);
  CHECK(s.tcp.counters().retransmissions == 1);
}

TEST_CASE("dupacks beyond three credit one MTU received") {
  Scripted s;
  s.tcp.write(10 * kMss);
  s.settle();
  s.ack(kMss);
  for (int i = 0; i < 3; ++i) s.ack(kMss);
  s.settle();
  const Bytes outstanding = s.fx.mf(s.flow).outstanding;
  s.ack(kMss);
  CHECK(s.fx.mf(s.flow).outstanding == outstanding - kMss);
  s.ack(kMss);
  CHECK(s.fx.mf(s.flow).outstanding == outstanding - 2 * kMss);
}

TEST_CASE("ECN echo reduces the window like a transient loss") {
  Scripted s;
  s.tcp.write(8 * kMss);
  s.settle();
  const Bytes cwnd = s.fx.mf(s.flow).cwnd;
  s.ack(kMss, true);
  CHECK(s.fx.mf(s.flow).cwnd == cwnd / 2);
}

TEST_CASE("timeout collapses the window and backs off exponentially") {
  Scripted s(16);
  s.tcp.write(16 * kMss);
  s.settle();
  REQUIRE(s.wire.size() == 16);
  CHECK(s.tcp.current_rto() == doctest::Approx(1.0));
  s.wire.clear();
  s.fx.run(1.0005);
  CHECK(s.tcp.counters().timeouts == 1);
  CHECK(s.fx.mf(s.flow).cwnd == kMss);
  CHECK(s.fx.mf(s.flow).ssthresh == 8 * kMss);
  CHECK(s.wire == std::vector<std::uint64_t>{0});
  CHECK(s.tcp.current_rto() == doctest::Approx(2.0));
  s.fx.run(3.0005);
  CHECK(s.tcp.counters().timeouts == 2);
  CHECK(s.tcp.current_rto() == doctest::Approx(4.0));
  s.fx.run(7.0005);
  CHECK(s.tcp.counters().timeouts == 3);
}

TEST_CASE("ack before the timer rearms it without a persistent update") {
  Scripted s(4);
  s.tcp.write(4 * kMss);
  s.settle();
  s.fx.run(0.9);
  s.ack(kMss);
  s.fx.run(1.5);
  CHECK(s.tcp.counters().timeouts == 0);
  CHECK(s.fx.mf(s.flow).cwnd > kMss);
}

TEST_CASE("Karn: acks covering retransmitted data give no rtt sample") {
  Scripted s(4);
  s.tcp.write(4 * kMss);
  s.settle();
  s.fx.run(1.0005);  // timeout, segment 0 retransmitted
  REQUIRE(s.tcp.counters().timeouts == 1);
  const auto samples = s.tcp.counters().rtt_samples;
  const double srtt = s.fx.mf(s.flow).srtt;
  s.ack(4 * kMss);
  CHECK(s.tcp.counters().rtt_samples == samples);
  CHECK(s.fx.mf(s.flow).srtt == srtt);
}

TEST_CASE("handshake gives the first rtt sample") {
  PathFixture fx;
  const cm::FlowId f = fx.open(5000);
  TcpSender tcp(fx.manager, fx.net, fx.route, f);
  TcpReceiver rx(fx.net, fx.ack_route, f.value);
  fx.net.set_handler(fx.receiver, [&](const sim::Packet& p) { rx.on_packet(p); });
  fx.net.set_handler(fx.sender, [&](const sim::Packet& p) { tcp.on_packet(p); });
  tcp.connect();
  tcp.write(10 * kMss);
  fx.run(0.0605);
  CHECK(tcp.established());
  CHECK(fx.mf(f).srtt == doctest::Approx(0.06).epsilon(0.01));
  fx.run(2.0);
  CHECK(rx.delivered() == 10 * kMss);
  CHECK(tcp.counters().segments_sent <= tcp.counters().grants);
}

TEST_CASE("writing after close throws") {
  Scripted s;
  s.tcp.close();
  CHECK_THROWS_AS(s.tcp.write(1), ConnectionClosed);
}

TEST_CASE("receiver buffers out-of-order data and acks cumulatively") {
  PathFixture fx;
  std::vector<std::uint64_t> acks;
  fx.net.set_handler(fx.sender,
                     [&](const sim::Packet& p) { acks.push_back(p.ack); });
  TcpReceiver rx(fx.net, fx.ack_route, 1);
  auto seg = [](std::uint64_t seq) {
    sim::Packet p;
    p.seq = seq;
    p.len = 1000;
    return p;
  };
  rx.on_packet(seg(0));
  rx.on_packet(seg(2000));
  rx.on_packet(seg(3000));
  rx.on_packet(seg(1000));
  fx.run(1.0);
  CHECK(acks == std::vector<std::uint64_t>{1000, 1000, 1000, 4000});
  CHECK(rx.delivered() == 4000);
}

TEST_CASE("delayed acks: one per two segments or after 200 ms") {
  PathFixture fx;
  std::vector<std::pair<double, std::uint64_t>> acks;
  fx.net.set_handler(fx.sender, [&](const sim::Packet& p) {
    acks.emplace_back(fx.sim_.now(), p.ack);
  });
  TcpReceiver rx(fx.net, fx.ack_route, 1, TcpReceiverConfig{.delayed_ack = true});
  sim::Packet p;
  p.len = 1000;
  rx.on_packet(p);
  p.seq = 1000;
  rx.on_packet(p);
  p.seq = 2000;
  rx.on_packet(p);
  fx.run(1.0);
  REQUIRE(acks.size() == 2);
  CHECK(acks[0].second == 2000);
  CHECK(acks[1].second == 3000);
  CHECK(acks[1].first - acks[0].first == doctest::Approx(0.2));
}

TEST_CASE("reliability: every byte arrives in order over lossy paths") {
  for (double p : {0.0, 0.01, 0.05, 0.15}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      sim::LinkConfig fwd;
      fwd.loss_prob = p;
      sim::LinkConfig rev;
      rev.loss_prob = p / 2;
      PathFixture fx(fwd, rev, {}, seed);
      const cm::FlowId f = fx.open(5000);
      TcpSender tcp(fx.manager, fx.net, fx.route, f);
      TcpReceiver rx(fx.net, fx.ack_route, f.value);
      std::uint64_t last = 0;
      bool monotone = true;
      rx.set_on_deliver([&](std::uint64_t n) {
        monotone = monotone && n >= last;
        last = n;
      });
      fx.net.set_handler(fx.receiver,
                         [&](const sim::Packet& pk) { rx.on_packet(pk); });
      fx.net.set_handler(fx.sender,
                         [&](const sim::Packet& pk) { tcp.on_packet(pk); });
      const std::uint64_t n = 300'000 + 777;
      tcp.connect();
      tcp.write(n);
      tcp.close();
      fx.run(600.0);
      CAPTURE(p);
      CAPTURE(seed);
      CHECK(rx.delivered() == n);
      CHECK(monotone);
      CHECK(tcp.closed());
      CHECK(tcp.counters().segments_sent <= tcp.counters().grants);
    }
  }
}
