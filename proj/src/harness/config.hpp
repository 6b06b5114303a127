#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apps/layers.hpp"

namespace harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scenario {
  TcpCompare,
  Sharing,
  LayeredAlf,
  LayeredRate,
  DelayedFeedback,
  FairnessEnsemble,
  UdpccBasic,
  Vat,
};

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);
const std::vector<Scenario>& all_scenarios();

struct LinkParams {
  double bandwidth_bps = 10e6;
  double delay = 0.030;
  std::uint64_t queue_limit = 50;
  double loss_prob = 0.0;
  bool ecn = false;
  std::uint32_t mtu = 1500;
  bool operator==(const LinkParams&) const = default;
};

struct BandwidthStep {
  double at = 0.0;
  double bandwidth_bps = 0.0;
  bool operator==(const BandwidthStep&) const = default;
};

struct CmParams {
  std::uint64_t initial_window_mtus = 1;
  std::uint64_t initial_ssthresh = 64 * 1024;
  double grant_lease = 0.05;
  double idle_rto_multiple = 4.0;
  bool linger_macroflows = false;
  double max_tick_period = 0.01;
  bool operator==(const CmParams&) const = default;
};

struct TcpParams {
  bool delayed_ack = false;
  bool handshake = true;
  bool operator==(const TcpParams&) const = default;
};

struct LayerParams {
  std::vector<double> rates{16000.0, 32000.0, 64000.0, 128000.0, 256000.0};
  double safety = 0.9;
  bool operator==(const LayerParams&) const = default;
  apps::LayerConfig to_layers() const { return {rates, safety}; }
};

struct RateAppParams {
  double thresh_down = 0.7;
  double thresh_up = 1.4;
  std::uint64_t queue_limit = 32;
  bool operator==(const RateAppParams&) const = default;
};

struct AlfParams {
  bool request_before_notify = false;
  bool operator==(const AlfParams&) const = default;
};

struct FeedbackParams {
  std::uint32_t batch_packets = 1;
  double batch_timeout = 0.0;
  bool operator==(const FeedbackParams&) const = default;
};

struct SharingParams {
  std::uint32_t transfers = 9;
  std::uint64_t transfer_bytes = 128 * 1024;
  double gap = 0.5;
  bool operator==(const SharingParams&) const = default;
};

struct EnsembleParams {
  std::uint32_t flows = 4;
  bool bulk = false;
  double warmup = 5.0;
  bool operator==(const EnsembleParams&) const = default;
};

struct UdpccParams {
  std::uint32_t flows = 4;
  std::uint32_t queue_depth = 4;
  bool operator==(const UdpccParams&) const = default;
};

struct VatParams {
  double bitrate_bps = 64000.0;
  double frame_interval = 0.020;
  std::uint64_t app_buf_limit = 4;
  double policer_depth_frames = 2.0;
  double thresh_down = 0.7;
  double thresh_up = 1.4;
  bool operator==(const VatParams&) const = default;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::TcpCompare;
  std::uint64_t seed = 1;
  double duration = 60.0;
  LinkParams link;
  LinkParams reverse_link;
  std::vector<BandwidthStep> bandwidth_schedule;
  CmParams cm;
  TcpParams tcp;
  LayerParams layers;
  RateAppParams rate_app;
  AlfParams alf;
  FeedbackParams feedback;
  SharingParams sharing;
  EnsembleParams ensemble;
  UdpccParams udpcc;
  VatParams vat;
  bool operator==(const ExperimentConfig&) const = default;
};

/// The configuration a scenario runs with when nothing is overridden.
ExperimentConfig default_config(Scenario scenario);

/// Reads a config object: "scenario" is required, every other field falls
/// back to the scenario default. Unknown fields and wrong types raise
/// ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

}  // namespace harness
