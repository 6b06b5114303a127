#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "core/congestion_manager.hpp"
#include "harness/config.hpp"
#include "sim/trace.hpp"

namespace harness {

/// Trace flow ids at or above this value belong to reference-TCP flows,
/// which run outside the congestion manager.
inline constexpr std::uint64_t kReferenceFlowBase = 1000;

struct RunResult {
  ExperimentConfig config;
  std::vector<sim::TraceRecord> trace;
  cm::OpCounters operations;
  nlohmann::json summary;
};

/// Builds the scenario's topology, runs it to config.duration and computes
/// the summary. Throws ConfigError for configurations the scenario cannot
/// run.
RunResult run_experiment(const ExperimentConfig& config);

/// Writes trace.csv, summary.json and config.json into `dir`, creating it.
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

}  // namespace harness
