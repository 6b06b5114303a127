#pragma once

#include <optional>

#include "core/types.hpp"

namespace cm {

/// Window-based AIMD with slow start and byte counting, one instance per
/// macroflow. All window arithmetic is in whole bytes.
///
/// Growth on NoLoss reports: slow start adds nrecd up to ssthresh; any
/// remainder (and all later bytes) feed a congestion-avoidance accumulator
/// that adds one MTU for every cwnd bytes acknowledged. The resulting window
/// depends only on the total acknowledged byte count, never on how it was
/// split across reports.
///
/// Transient and Ecn reports halve the window at most once per smoothed RTT.
/// Persistent reports collapse it to one MTU.
class AimdController {
 public:
  AimdController(Bytes mtu, Bytes initial_window, Bytes initial_ssthresh);

  /// Applies one feedback report. Returns true if cwnd or ssthresh changed.
  bool on_report(const FeedbackReport& report, Seconds now);

  /// Restart after idle: back to the initial window.
  bool restart();

  Bytes cwnd() const { return cwnd_; }
  Bytes ssthresh() const { return ssthresh_; }
  Bytes mtu() const { return mtu_; }
  Bytes initial_window() const { return initial_window_; }
  Phase phase() const {
    return cwnd_ < ssthresh_ ? Phase::SlowStart : Phase::CongestionAvoidance;
  }
  bool has_rtt() const { return has_rtt_; }
  Seconds srtt() const { return srtt_; }
  Seconds rttvar() const { return rttvar_; }
  double loss_rate() const { return loss_rate_; }

  /// srtt + 4 rttvar within [0.2 s, 60 s]; 1 s before the first sample.
  Seconds rto() const;

 private:
  void sample_rtt(Seconds rtt);
  void grow(Bytes acked);
  bool halve(Seconds now);
  bool collapse(Seconds now);

  Bytes mtu_;
  Bytes initial_window_;
  Bytes cwnd_;
  Bytes ssthresh_;
  Bytes ca_acked_ = 0;
  bool has_rtt_ = false;
  Seconds srtt_ = 0.0;
  Seconds rttvar_ = 0.0;
  double loss_rate_ = 0.0;
  std::optional<Seconds> last_reduction_;
};

}  // namespace cm
