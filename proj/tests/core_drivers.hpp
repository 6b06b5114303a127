#pragma once

// Randomized drivers shared by the property tests and the acceptance suite.

#include <algorithm>
#include <random>
#include <vector>

#include "core/congestion_manager.hpp"
#include "harness/oracle_aimd.hpp"

namespace drivers {

struct WindowCase {
  cm::ManagerConfig config;
  std::vector<harness::TimedReport> reports;
};

inline cm::FeedbackReport random_report(std::mt19937_64& rng, cm::Bytes mtu) {
  cm::FeedbackReport r;
  const auto roll = rng() % 100;
  r.lossmode = roll < 70   ? cm::LossMode::NoLoss
               : roll < 85 ? cm::LossMode::Transient
               : roll < 92 ? cm::LossMode::Ecn
                           : cm::LossMode::Persistent;
  r.nsent = rng() % (4 * mtu + 1);
  r.nrecd = r.nsent == 0 ? 0 : rng() % (r.nsent + 1);
  if (r.lossmode == cm::LossMode::NoLoss) r.nrecd = r.nsent;
  if (rng() % 10 < 7)
    r.rtt = 0.01 + std::uniform_real_distribution<double>(0.0, 0.5)(rng);
  return r;
}

inline WindowCase random_window_case(std::mt19937_64& rng, std::size_t max_len) {
  static constexpr cm::Bytes kMtus[] = {536, 1460, 1500, 9000};
  WindowCase c;
  c.config.default_mtu = kMtus[rng() % 4];
  c.config.initial_window_mtus = 1 + rng() % 4;
  c.config.initial_ssthresh = c.config.default_mtu * (1 + rng() % 64);
  const std::size_t len = 1 + rng() % max_len;
  double t = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    t += std::uniform_real_distribution<double>(0.0, 0.3)(rng);
    c.reports.push_back({t, random_report(rng, c.config.default_mtu)});
  }
  return c;
}

/// Feeds the reports through cm_update on one flow and records the
/// macroflow window after each.
inline std::vector<harness::WindowState> manager_trace(const WindowCase& c) {
  double now = 0.0;
  cm::CongestionManager manager(c.config, [&] { return now; });
  const cm::FlowId flow = manager.open(cm::FlowKey{1, 5000, 2, 80});
  const cm::MacroflowId mf = manager.flow_info(flow).macroflow;
  std::vector<harness::WindowState> out;
  out.reserve(c.reports.size());
  for (const harness::TimedReport& step : c.reports) {
    now = step.at;
    manager.update(flow, step.report);
    const auto snap = manager.macroflow_info(mf);
    out.push_back({snap.cwnd, snap.ssthresh});
  }
  return out;
}

inline std::vector<harness::WindowState> oracle_trace(const WindowCase& c) {
  return harness::oracle_aimd(
      c.reports, {c.config.default_mtu,
                  c.config.default_mtu * c.config.initial_window_mtus,
                  c.config.initial_ssthresh});
}

/// Splits `total` into a random number of positive parts.
inline std::vector<cm::Bytes> random_partition(std::mt19937_64& rng,
                                               cm::Bytes total) {
  std::vector<cm::Bytes> parts;
  while (total > 0) {
    const cm::Bytes part = 1 + rng() % total;
    parts.push_back(part);
    total -= part;
  }
  std::shuffle(parts.begin(), parts.end(), rng);
  return parts;
}

struct PartitionCase {
  cm::Bytes mtu = 1500;
  cm::Bytes initial_cwnd = 0;
  cm::Bytes ssthresh = 0;
  cm::Bytes total = 0;
};

/// Final cwnd after acknowledging `parts` in order, starting from a window
/// set up by the case.
inline cm::Bytes cwnd_after(const PartitionCase& c,
                            const std::vector<cm::Bytes>& parts) {
  cm::ManagerConfig config;
  config.default_mtu = c.mtu;
  config.initial_window_mtus = c.initial_cwnd / c.mtu;
  config.initial_ssthresh = c.ssthresh;
  cm::CongestionManager manager(config);
  const cm::FlowId flow = manager.open(cm::FlowKey{1, 5000, 2, 80});
  for (cm::Bytes part : parts)
    manager.update(flow, cm::FeedbackReport{part, part, cm::LossMode::NoLoss, {}});
  return manager.macroflow_info(manager.flow_info(flow).macroflow).cwnd;
}

/// A case that stays in one phase for the whole acknowledged total: either
/// slow start ending at or below ssthresh, or congestion avoidance from the
/// start.
inline PartitionCase random_partition_case(std::mt19937_64& rng) {
  PartitionCase c;
  c.mtu = 500 + rng() % 1000;
  const bool slow_start = rng() % 2 == 0;
  const cm::Bytes mtus = 1 + rng() % 8;
  c.initial_cwnd = mtus * c.mtu;
  if (slow_start) {
    c.ssthresh = c.initial_cwnd + c.mtu * (2 + rng() % 40);
    c.total = 1 + rng() % (c.ssthresh - c.initial_cwnd);
  } else {
    c.ssthresh = 2 * c.mtu;
    c.initial_cwnd = std::max(c.initial_cwnd, c.ssthresh);
    c.total = 1 + rng() % (40 * c.initial_cwnd);
  }
  return c;
}

}  // namespace drivers
