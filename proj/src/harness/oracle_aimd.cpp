#include "harness/oracle_aimd.hpp"

#include <optional>

namespace harness {

std::vector<WindowState> oracle_aimd(std::span<const TimedReport> reports,
                                     const AimdOracleParams& params) {
  const cm::Bytes mtu = params.mtu;
  cm::Bytes cwnd = params.initial_window;
  cm::Bytes ssthresh =
      params.initial_ssthresh > 2 * mtu ? params.initial_ssthresh : 2 * mtu;
  cm::Bytes credit = 0;  // bytes acknowledged toward the next additive step
  std::optional<double> srtt;
  std::optional<double> last_cut;

  std::vector<WindowState> trace;
  trace.reserve(reports.size());
  for (const TimedReport& step : reports) {
    const cm::FeedbackReport& r = step.report;
    if (r.rtt) srtt = srtt ? 0.875 * *srtt + 0.125 * *r.rtt : *r.rtt;

    if (r.lossmode == cm::LossMode::NoLoss) {
      cm::Bytes left = r.nrecd;
      if (cwnd < ssthresh) {
        const cm::Bytes room = ssthresh - cwnd;
        const cm::Bytes take = left < room ? left : room;
        cwnd += take;
        left -= take;
      }
      credit += left;
      while (left > 0 && credit >= cwnd) {
        credit -= cwnd;
        cwnd += mtu;
      }
    } else if (r.lossmode == cm::LossMode::Persistent) {
      ssthresh = cwnd / 2 > 2 * mtu ? cwnd / 2 : 2 * mtu;
      cwnd = mtu;
      credit = 0;
      last_cut = step.at;
    } else {
      const double gate = srtt.value_or(0.0);
      if (!last_cut || step.at - *last_cut >= gate) {
        ssthresh = cwnd / 2 > 2 * mtu ? cwnd / 2 : 2 * mtu;
        if (cwnd > ssthresh) cwnd = ssthresh;
        credit = 0;
        last_cut = step.at;
      }
    }
    trace.push_back({cwnd, ssthresh});
  }
  return trace;
}

}  // namespace harness
