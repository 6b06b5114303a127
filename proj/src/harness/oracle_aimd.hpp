#pragma once

#include <span>
#include <vector>

#include "core/types.hpp"

namespace harness {

struct TimedReport {
  cm::Seconds at = 0.0;
  cm::FeedbackReport report;
};

struct AimdOracleParams {
  cm::Bytes mtu = 1500;
  cm::Bytes initial_window = 1500;
  cm::Bytes initial_ssthresh = 64 * 1024;
};

struct WindowState {
  cm::Bytes cwnd = 0;
  cm::Bytes ssthresh = 0;
  bool operator==(const WindowState&) const = default;
};

/// Recomputes the macroflow window after each report from first principles:
///   NoLoss      slow start adds nrecd up to ssthresh; past it every cwnd
///               bytes acknowledged add one MTU (bytes carry over).
///   Transient,  ssthresh = max(cwnd/2, 2 MTU), cwnd = min(cwnd, ssthresh),
///   Ecn         unless the previous reduction was less than one srtt ago.
///   Persistent  ssthresh = max(cwnd/2, 2 MTU), cwnd = 1 MTU, always.
/// An RTT sample in a report updates srtt (gains 1/8) before the rule runs.
std::vector<WindowState> oracle_aimd(std::span<const TimedReport> reports,
                                     const AimdOracleParams& params);

}  // namespace harness
