#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "core/congestion_manager.hpp"
#include "harness/config.hpp"
#include "sim/trace.hpp"

namespace harness {

/// Everything in the summary except "operations" is derived from the trace
/// and the config alone, so a saved trace.csv can be re-summarized offline.
nlohmann::json summarize(const ExperimentConfig& config,
                         const std::vector<sim::TraceRecord>& trace);

/// API-call accounting, with crossings normalized by the megabytes the
/// congestion-managed flows delivered.
nlohmann::json operations_json(const cm::OpCounters& ops,
                               const std::vector<sim::TraceRecord>& trace);

/// True when every entry in summary["checks"] passed.
bool checks_pass(const nlohmann::json& summary);

// Building blocks, exposed for tests.

/// Value of a step function given by (t, value) change points at from,
/// from + period, ... up to and including `to`. Sample times before the first
/// change point are skipped.
std::vector<double> sample_steps(const std::vector<std::pair<double, double>>& steps,
                                 double from, double to, double period);

/// Population coefficient of variation; 0 for an empty or all-zero series.
double coefficient_of_variation(const std::vector<double>& xs);

struct StepResponse {
  double at = 0.0;
  double to_bps = 0.0;
  int direction = 0;  // -1 bandwidth fell, +1 rose
  std::optional<double> response;  // seconds from the step to the first layer
                                   // move in the step's direction
  std::optional<double> rtt;  // path RTT when the layer moved
};

/// Layer reaction of `flow` to each bandwidth step in the config.
std::vector<StepResponse> step_responses(
    const ExperimentConfig& config, const std::vector<sim::TraceRecord>& trace,
    std::uint64_t flow);

}  // namespace harness
