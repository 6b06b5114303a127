#include <doctest.h>

#include "core/aimd_controller.hpp"

using cm::AimdController;
using cm::FeedbackReport;
using cm::LossMode;

namespace {
constexpr cm::Bytes kMtu = 1500;

FeedbackReport acked(cm::Bytes n, std::optional<double> rtt = std::nullopt) {
  return FeedbackReport{n, n, LossMode::NoLoss, rtt};
}
FeedbackReport loss(LossMode mode) { return FeedbackReport{kMtu, 0, mode, {}}; }
}  // namespace

TEST_CASE("fresh controller starts at one MTU in slow start") {
  AimdController c(kMtu, kMtu, 64 * 1024);
  CHECK(c.cwnd() == kMtu);
  CHECK(c.ssthresh() == 64 * 1024);
  CHECK(c.phase() == cm::Phase::SlowStart);
  CHECK_FALSE(c.has_rtt());
  CHECK(c.rto() == doctest::Approx(1.0));
}

TEST_CASE("slow start doubles per round when every MTU is acked") {
  AimdController c(kMtu, kMtu, 1'000'000);
  cm::Bytes expected = kMtu;
  for (int round = 0; round < 6; ++round) {
    const cm::Bytes flight = c.cwnd() / kMtu;
    for (cm::Bytes i = 0; i < flight; ++i) c.on_report(acked(kMtu), 0.0);
    expected *= 2;
    CHECK(c.cwnd() == expected);
  }
}

TEST_CASE("transient halves the window, persistent collapses it") {
  SUBCASE("cwnd 20 MTU transient gives 10 MTU") {
    AimdController c(kMtu, 20 * kMtu, 8 * kMtu);
    c.on_report(loss(LossMode::Transient), 1.0);
    CHECK(c.cwnd() == 10 * kMtu);
    CHECK(c.ssthresh() == 10 * kMtu);
    CHECK(c.phase() == cm::Phase::CongestionAvoidance);
  }
  SUBCASE("ecn acts like transient") {
    AimdController c(kMtu, 20 * kMtu, 8 * kMtu);
    c.on_report(loss(LossMode::Ecn), 1.0);
    CHECK(c.cwnd() == 10 * kMtu);
  }
  SUBCASE("cwnd 16 MTU persistent gives 1 MTU with ssthresh 8 MTU") {
    AimdController c(kMtu, 16 * kMtu, 8 * kMtu);
    c.on_report(loss(LossMode::Persistent), 1.0);
    CHECK(c.cwnd() == kMtu);
    CHECK(c.ssthresh() == 8 * kMtu);
    CHECK(c.phase() == cm::Phase::SlowStart);
  }
  SUBCASE("transient never raises a window below the 2 MTU floor") {
    AimdController c(kMtu, kMtu, 8 * kMtu);
    c.on_report(loss(LossMode::Transient), 1.0);
    CHECK(c.cwnd() == kMtu);
    CHECK(c.ssthresh() == 2 * kMtu);
  }
}

TEST_CASE("only one halving per smoothed round trip") {
  AimdController c(kMtu, 40 * kMtu, 8 * kMtu);
  c.on_report(acked(0, 0.1), 0.0);
  c.on_report(loss(LossMode::Transient), 1.0);
  CHECK(c.cwnd() == 20 * kMtu);
  c.on_report(loss(LossMode::Transient), 1.05);
  CHECK(c.cwnd() == 20 * kMtu);
  c.on_report(loss(LossMode::Transient), 1.1);
  CHECK(c.cwnd() == 10 * kMtu);
}

TEST_CASE("congestion avoidance adds one MTU per window of acked bytes") {
  AimdController c(kMtu, 10 * kMtu, 10 * kMtu);
  REQUIRE(c.phase() == cm::Phase::CongestionAvoidance);
  c.on_report(acked(10 * kMtu - 1), 0.0);
  CHECK(c.cwnd() == 10 * kMtu);
  c.on_report(acked(1), 0.0);
  CHECK(c.cwnd() == 11 * kMtu);
}

TEST_CASE("one 1500 byte ack equals ten 150 byte acks") {
  AimdController one(kMtu, 4 * kMtu, 64 * 1024);
  AimdController ten(kMtu, 4 * kMtu, 64 * 1024);
  one.on_report(acked(1500), 0.0);
  for (int i = 0; i < 10; ++i) ten.on_report(acked(150), 0.0);
  CHECK(one.cwnd() == ten.cwnd());
}

TEST_CASE("rtt estimator uses the conventional gains") {
  AimdController c(kMtu, kMtu, 64 * 1024);
  c.on_report(acked(0, 0.1), 0.0);
  CHECK(c.srtt() == doctest::Approx(0.1));
  CHECK(c.rttvar() == doctest::Approx(0.05));
  c.on_report(acked(0, 0.2), 0.0);
  CHECK(c.rttvar() == doctest::Approx(0.75 * 0.05 + 0.25 * 0.1));
  CHECK(c.srtt() == doctest::Approx(0.875 * 0.1 + 0.125 * 0.2));
  CHECK(c.rto() == doctest::Approx(c.srtt() + 4 * c.rttvar()));
}

TEST_CASE("loss rate is an EWMA with gain one eighth") {
  AimdController c(kMtu, kMtu, 64 * 1024);
  c.on_report(FeedbackReport{1000, 0, LossMode::Transient, {}}, 0.0);
  CHECK(c.loss_rate() == doctest::Approx(0.125));
  c.on_report(FeedbackReport{1000, 1000, LossMode::NoLoss, {}}, 0.0);
  CHECK(c.loss_rate() == doctest::Approx(0.125 * 0.875));
}

TEST_CASE("restart returns to the initial window") {
  AimdController c(kMtu, kMtu, 64 * 1024);
  for (int i = 0; i < 39; ++i) c.on_report(acked(kMtu), 0.0);
  REQUIRE(c.cwnd() == 40 * kMtu);
  CHECK(c.restart());
  CHECK(c.cwnd() == kMtu);
  CHECK_FALSE(c.restart());
}
