#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <vector>

#include "core/congestion_manager.hpp"
#include "core_drivers.hpp"

using namespace cm;

TEST_CASE("cwnd trace equals the AIMD oracle on random report streams") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto c = drivers::random_window_case(rng, 200);
    const auto got = drivers::manager_trace(c);
    const auto want = drivers::oracle_trace(c);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      INFO("case " << i << " step " << k);
      REQUIRE(got[k].cwnd == want[k].cwnd);
      REQUIRE(got[k].ssthresh == want[k].ssthresh);
    }
  }
}

TEST_CASE("final cwnd is invariant under partition of acked bytes") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    const auto c = drivers::random_partition_case(rng);
    const Bytes whole = drivers::cwnd_after(c, {c.total});
    for (int k = 0; k < 5; ++k)
      REQUIRE(drivers::cwnd_after(c, drivers::random_partition(rng, c.total)) ==
              whole);
  }
}

namespace {
struct Harness {
  double now = 0.0;
  CongestionManager manager;
  explicit Harness(ManagerConfig config = {})
      : manager(config, [this] { return now; }) {}
};
}  // namespace

TEST_CASE("round robin: any n*k consecutive grants give each flow n +- 1") {
  for (std::size_t k : {2u, 3u, 5u}) {
    Harness h;
    std::vector<FlowId> flows;
    std::vector<FlowId> grants;
    std::map<FlowId, int> unacked;
    for (std::size_t i = 0; i < k; ++i) {
      const FlowId f = h.manager.open(FlowKey{1, static_cast<std::uint16_t>(7000 + i), 2, 80});
      h.manager.register_send(f, [&](FlowId id) {
        grants.push_back(id);
        h.manager.notify(id, 1500);
        ++unacked[id];
        h.manager.request(id);  // unbounded demand
      });
      flows.push_back(f);
    }
    for (FlowId f : flows) h.manager.request(f);
    // Acknowledge everything in flight, in grant order, for a while.
    std::mt19937_64 rng(k);
    for (int round = 0; round < 300; ++round) {
      h.now += 0.05;
      for (FlowId f : flows) {
        const int n = unacked[f];
        if (n == 0) continue;
        unacked[f] = 0;
        const Bytes bytes = 1500 * static_cast<Bytes>(n);
        const auto mode = rng() % 20 == 0 ? LossMode::Transient : LossMode::NoLoss;
        h.manager.update(f, FeedbackReport{bytes, mode == LossMode::NoLoss ? bytes : 0,
                                           mode, 0.05});
      }
    }
    REQUIRE(grants.size() > 50 * k);
    for (std::size_t n : {1u, 2u, 7u}) {
      const std::size_t w = n * k;
      for (std::size_t start = 0; start + w <= grants.size(); ++start) {
        std::map<FlowId, std::size_t> count;
        for (std::size_t j = start; j < start + w; ++j) ++count[grants[j]];
        for (FlowId f : flows) {
          INFO("k=" << k << " n=" << n << " start=" << start);
          REQUIRE(count[f] + 1 >= n);
          REQUIRE(count[f] <= n + 1);
        }
      }
    }
  }
}

TEST_CASE("flows share a macroflow exactly when they share a destination") {
  std::mt19937_64 rng(13);
  Harness h;
  std::vector<std::pair<FlowId, HostId>> opened;
  std::set<FlowKey> keys;
  for (int i = 0; i < 200; ++i) {
    FlowKey k{static_cast<HostId>(1 + rng() % 3), static_cast<std::uint16_t>(rng() % 50),
              static_cast<HostId>(10 + rng() % 6), 80,
              rng() % 2 ? Protocol::Tcp : Protocol::Udp};
    if (!keys.insert(k).second) continue;
    opened.emplace_back(h.manager.open(k), k.dst_addr);
  }
  for (const auto& [a, da] : opened)
    for (const auto& [b, db] : opened)
      CHECK((h.manager.flow_info(a).macroflow == h.manager.flow_info(b).macroflow) ==
            (da == db));
}

namespace {
// Random mix of requests, notifies (up to one MTU), and reports across a few
// flows on one macroflow, with invariant checks after every call and inside
// every grant.
struct OpSoup {
  static constexpr Bytes kMtu = 1500;
  Harness h;
  std::vector<FlowId> flows;
  std::map<FlowId, std::uint64_t> requests, callbacks;
  std::mt19937_64 rng;
  MacroflowId mf;
  bool grant_bound_ok = true;

  explicit OpSoup(std::uint64_t seed) : rng(seed) {
    for (std::uint16_t p = 0; p < 3; ++p) {
      const FlowId f = h.manager.open(FlowKey{1, static_cast<std::uint16_t>(9000 + p), 2, 80});
      h.manager.register_send(f, [this](FlowId id) {
        ++callbacks[id];
        const auto s = h.manager.macroflow_info(mf);
        // The grant's own reservation is already counted.
        if (s.outstanding + s.reserved > s.cwnd + s.mtu) grant_bound_ok = false;
        if (rng() % 8 != 0) h.manager.notify(id, 1 + rng() % kMtu);
        else h.manager.notify(id, 0);
      });
      flows.push_back(f);
    }
    mf = h.manager.flow_info(flows[0]).macroflow;
  }

  void step() {
    const FlowId f = flows[rng() % flows.size()];
    h.now += std::uniform_real_distribution<double>(0.0, 0.05)(rng);
    switch (rng() % 4) {
      case 0:
      case 1:
        ++requests[f];
        h.manager.request(f);
        break;
      case 2: {
        const auto s = h.manager.macroflow_info(mf);
        const Bytes nsent = s.outstanding == 0 ? 0 : 1 + rng() % s.outstanding;
        auto r = drivers::random_report(rng, kMtu);
        r.nsent = nsent;
        r.nrecd = r.lossmode == LossMode::NoLoss ? nsent
                  : nsent == 0                   ? 0
                                                 : rng() % (nsent + 1);
        h.manager.update(f, r);
        break;
      }
      case 3:
        h.manager.scheduler_tick(h.now);
        break;
    }
  }
};
}  // namespace

TEST_CASE("grants never push outstanding past cwnd plus one MTU") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    OpSoup soup(seed);
    for (int i = 0; i < 2000; ++i) soup.step();
    CHECK(soup.grant_bound_ok);
  }
}

TEST_CASE("send callbacks equal satisfied requests and never exceed requests") {
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    OpSoup soup(seed);
    for (int i = 0; i < 2000; ++i) {
      soup.step();
      for (FlowId f : soup.flows) {
        const auto info = soup.h.manager.flow_info(f);
        REQUIRE(soup.callbacks[f] == soup.requests[f] - info.pending_requests);
        REQUIRE(soup.callbacks[f] <= soup.requests[f]);
      }
    }
  }
}

TEST_CASE("phase is slow start exactly when cwnd is below ssthresh") {
  for (std::uint64_t seed = 200; seed < 250; ++seed) {
    OpSoup soup(seed);
    for (int i = 0; i < 2000; ++i) {
      soup.step();
      const auto s = soup.h.manager.macroflow_info(soup.mf);
      REQUIRE((s.phase == Phase::SlowStart) == (s.cwnd < s.ssthresh));
    }
  }
}

TEST_CASE("cwnd never shrinks on NoLoss and always shrinks on loss above the floor") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 500; ++i) {
    Harness h;
    const FlowId f = h.manager.open(FlowKey{1, 5000, 2, 80});
    const MacroflowId mf = h.manager.flow_info(f).macroflow;
    for (int k = 0; k < 100; ++k) {
      // Reports ten seconds apart: no reduction is suppressed as a repeat.
      h.now += 10.0;
      const auto r = drivers::random_report(rng, 1500);
      const Bytes before = h.manager.macroflow_info(mf).cwnd;
      h.manager.update(f, r);
      const Bytes after = h.manager.macroflow_info(mf).cwnd;
      switch (r.lossmode) {
        case LossMode::NoLoss:
          REQUIRE(after >= before);
          break;
        case LossMode::Persistent:
          REQUIRE(after == 1500);
          if (before > 1500) REQUIRE(after < before);
          break;
        case LossMode::Transient:
        case LossMode::Ecn:
          REQUIRE(after <= before);
          if (before > 3000) REQUIRE(after < before);
          break;
      }
    }
  }
}

TEST_CASE("rate callbacks fire exactly when a scalar replay says they should") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 200; ++i) {
    Harness h;
    const FlowId f = h.manager.open(FlowKey{1, 5000, 2, 80, Protocol::Udp});
    const double down = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    const double up = std::uniform_real_distribution<double>(1.0, 3.0)(rng);
    h.manager.thresh(f, down, up);
    int fired = 0;
    h.manager.register_update(f, [&](FlowId, double, Seconds, double) { ++fired; });

    double r0 = 0.0;
    for (int k = 0; k < 150; ++k) {
      h.now += std::uniform_real_distribution<double>(0.0, 0.4)(rng);
      fired = 0;
      h.manager.update(f, drivers::random_report(rng, 1500));
      const double rate = h.manager.query(f).rate;
      const bool expect = rate < r0 * down || rate > r0 * up;
      INFO("case " << i << " step " << k << " rate " << rate << " r0 " << r0);
      REQUIRE(fired == (expect ? 1 : 0));
      if (expect) r0 = rate;
    }
  }
}
