#include "core/aimd_controller.hpp"

#include <algorithm>
#include <cmath>

namespace cm {

namespace {
constexpr Seconds kMinRto = 0.2;
constexpr Seconds kMaxRto = 60.0;
constexpr Seconds kInitialRto = 1.0;
constexpr double kLossGain = 1.0 / 8.0;
}  // namespace

AimdController::AimdController(Bytes mtu, Bytes initial_window,
                               Bytes initial_ssthresh)
    : mtu_(mtu),
      initial_window_(initial_window),
      cwnd_(initial_window),
      ssthresh_(std::max(initial_ssthresh, 2 * mtu)) {}

bool AimdController::on_report(const FeedbackReport& report, Seconds now) {
  if (report.rtt) sample_rtt(*report.rtt);

  if (report.nsent > 0) {
    const double sample = static_cast<double>(report.nsent - report.nrecd) /
                          static_cast<double>(report.nsent);
    loss_rate_ += kLossGain * (sample - loss_rate_);
  }

  switch (report.lossmode) {
    case LossMode::NoLoss: {
      const Bytes before = cwnd_;
      grow(report.nrecd);
      return cwnd_ != before;
    }
    case LossMode::Transient:
    case LossMode::Ecn:
      return halve(now);
    case LossMode::Persistent:
      return collapse(now);
  }
  return false;
}

bool AimdController::restart() {
  if (cwnd_ <= initial_window_ && ca_acked_ == 0) return false;
  cwnd_ = std::min(cwnd_, initial_window_);
  ca_acked_ = 0;
  return true;
}

Seconds AimdController::rto() const {
  if (!has_rtt_) return kInitialRto;
  return std::clamp(srtt_ + 4.0 * rttvar_, kMinRto, kMaxRto);
}

void AimdController::sample_rtt(Seconds rtt) {
  if (!has_rtt_) {
    srtt_ = rtt;
    rttvar_ = rtt / 2.0;
    has_rtt_ = true;
    return;
  }
  rttvar_ = 0.75 * rttvar_ + 0.25 * std::fabs(rtt - srtt_);
  srtt_ = 0.875 * srtt_ + 0.125 * rtt;
}

void AimdController::grow(Bytes acked) {
  if (cwnd_ < ssthresh_) {
    const Bytes step = std::min(acked, ssthresh_ - cwnd_);
    cwnd_ += step;
    acked -= step;
  }
  if (acked == 0) return;
  ca_acked_ += acked;
  while (ca_acked_ >= cwnd_) {
    ca_acked_ -= cwnd_;
    cwnd_ += mtu_;
  }
}

bool AimdController::halve(Seconds now) {
  // One reduction per round trip: later reports in the same RTT describe
  // the same congestion event.
  if (last_reduction_ && now - *last_reduction_ < srtt_) return false;
  last_reduction_ = now;
  const Bytes old_cwnd = cwnd_;
  const Bytes old_ssthresh = ssthresh_;
  ssthresh_ = std::max(cwnd_ / 2, 2 * mtu_);
  cwnd_ = std::min(cwnd_, ssthresh_);
  ca_acked_ = 0;
  return cwnd_ != old_cwnd || ssthresh_ != old_ssthresh;
}

bool AimdController::collapse(Seconds now) {
  last_reduction_ = now;
  const Bytes old_cwnd = cwnd_;
  const Bytes old_ssthresh = ssthresh_;
  ssthresh_ = std::max(cwnd_ / 2, 2 * mtu_);
  cwnd_ = mtu_;
  ca_acked_ = 0;
  return cwnd_ != old_cwnd || ssthresh_ != old_ssthresh;
}

}  // namespace cm
