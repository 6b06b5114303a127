#include "harness/summary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "harness/experiment.hpp"

namespace harness {

using nlohmann::json;
using sim::TraceKind;
using sim::TraceRecord;

namespace {

constexpr double kSamplePeriod = 0.1;

bool is_reference(std::uint64_t flow) { return flow >= kReferenceFlowBase; }

struct FlowTotals {
  std::uint64_t delivered_bytes = 0;
  std::uint64_t goodput_bytes = 0;
  std::uint64_t sent_packets = 0;
  std::uint64_t dropped_packets = 0;
  std::uint64_t marked_packets = 0;
};

std::map<std::uint64_t, FlowTotals> flow_totals(
    const std::vector<TraceRecord>& trace, double from = 0.0) {
  std::map<std::uint64_t, FlowTotals> totals;
  std::map<std::uint64_t, std::set<double>> seen;
  for (const TraceRecord& r : trace) {
    if (r.t < from) continue;
    switch (r.kind) {
      case TraceKind::Deliver: {
        FlowTotals& f = totals[r.flow];
        const auto bytes = static_cast<std::uint64_t>(r.value2);
        f.delivered_bytes += bytes;
        if (seen[r.flow].insert(r.value1).second) f.goodput_bytes += bytes;
        break;
      }
      case TraceKind::Send: ++totals[r.flow].sent_packets; break;
      case TraceKind::Drop: ++totals[r.flow].dropped_packets; break;
      case TraceKind::Mark: ++totals[r.flow].marked_packets; break;
      default: break;
    }
  }
  return totals;
}

std::vector<std::pair<double, double>> steps_of(
    const std::vector<TraceRecord>& trace, TraceKind kind, std::uint64_t flow) {
  std::vector<std::pair<double, double>> out;
  for (const TraceRecord& r : trace)
    if (r.kind == kind && r.flow == flow) out.emplace_back(r.t, r.value1);
  return out;
}

std::set<std::uint64_t> flows_with(const std::vector<TraceRecord>& trace,
                                   TraceKind kind) {
  std::set<std::uint64_t> out;
  for (const TraceRecord& r : trace)
    if (r.kind == kind) out.insert(r.flow);
  return out;
}

json check(const std::string& name, bool pass, json value, json bound) {
  return {{"name", name}, {"pass", pass}, {"value", std::move(value)},
          {"bound", std::move(bound)}};
}

/// Round-trip time a packet would have seen at `t`: the one-way delay of the
/// most recent data packet of `flow` delivered by then, plus the reverse
/// path's propagation and serialization of a 40-byte acknowledgement.
class PathRtt {
 public:
  PathRtt(const ExperimentConfig& config, const std::vector<TraceRecord>& trace,
          std::uint64_t flow) {
    reverse_ = config.reverse_link.delay +
               40.0 * 8.0 / config.reverse_link.bandwidth_bps;
    std::map<double, double> sent;
    for (const TraceRecord& r : trace) {
      if (r.flow != flow) continue;
      if (r.kind == TraceKind::Send) sent[r.value1] = r.t;
      if (r.kind == TraceKind::Deliver)
        if (auto it = sent.find(r.value1); it != sent.end())
          one_way_.emplace_back(r.t, r.t - it->second);
    }
  }

  std::optional<double> at(double t) const {
    auto it = std::upper_bound(
        one_way_.begin(), one_way_.end(), t,
        [](double x, const std::pair<double, double>& p) { return x < p.first; });
    if (it == one_way_.begin()) return std::nullopt;
    return std::prev(it)->second + reverse_;
  }

 private:
  double reverse_ = 0.0;
  std::vector<std::pair<double, double>> one_way_;
};

json layer_metrics(const ExperimentConfig& c, const std::vector<TraceRecord>& trace,
                   json& checks) {
  json metrics = json::object();
  const auto flows = flows_with(trace, TraceKind::LayerChange);
  if (flows.empty()) return metrics;
  const std::uint64_t flow = *flows.begin();
  const bool alf = c.scenario == Scenario::LayeredAlf;

  std::uint64_t changes = 0;
  for (const TraceRecord& r : trace)
    if (r.kind == TraceKind::LayerChange && r.flow == flow) ++changes;
  metrics["layer_changes"] = changes > 0 ? changes - 1 : 0;

  json responses = json::array();
  for (const StepResponse& s : step_responses(c, trace, flow)) {
    json j = {{"at", s.at}, {"to_bps", s.to_bps}, {"direction", s.direction}};
    j["response"] = s.response ? json(*s.response) : json(nullptr);
    j["rtt"] = s.rtt ? json(*s.rtt) : json(nullptr);
    double limit = 1.0;
    std::string name = "rate_app_step_" + std::to_string(responses.size());
    if (alf) {
      limit = s.rtt ? 2.0 * *s.rtt : 0.0;
      name = "alf_step_" + std::to_string(responses.size());
    }
    j["limit"] = limit;
    checks.push_back(check(name + "_within_limit",
                           s.response && *s.response <= limit,
                           j["response"], limit));
    responses.push_back(std::move(j));
  }
  metrics["step_responses"] = std::move(responses);
  return metrics;
}

json rate_metrics(const ExperimentConfig& c, const std::vector<TraceRecord>& trace,
                  json& checks) {
  json metrics = json::object();
  std::vector<std::pair<double, double>> rates;
  for (const TraceRecord& r : trace)
    if (r.kind == TraceKind::RateCallback) rates.emplace_back(r.t, r.value1);
  if (rates.empty()) {
    metrics["first_rate_callback"] = nullptr;
    checks.push_back(check("rate_callback_seen", false, nullptr, nullptr));
    return metrics;
  }
  const double first = rates.front().first;
  metrics["first_rate_callback"] = first;
  metrics["rate_callbacks"] = rates.size();
  metrics["rate_cv"] =
      coefficient_of_variation(sample_steps(rates, first, c.duration, kSamplePeriod));
  std::vector<double> deltas;
  for (std::size_t i = 1; i < rates.size(); ++i)
    deltas.push_back(std::fabs(rates[i].second - rates[i - 1].second));
  metrics["rate_change_cv"] = coefficient_of_variation(deltas);

  if (c.feedback.batch_timeout > 0.0) {
    const double bound = 0.75 * c.feedback.batch_timeout;
    checks.push_back(
        check("first_rate_callback_delayed", first >= bound, first, bound));
  }
  return metrics;
}

json vat_metrics(const ExperimentConfig& c, const std::vector<TraceRecord>& trace,
                 json& checks) {
  std::uint64_t sent = 0, policed = 0, buf_drops = 0;
  bool fresh = true, fifo = true;
  double last_sent = -1.0, max_delay = 0.0;
  for (const TraceRecord& r : trace) {
    if (r.kind == TraceKind::Send) {
      ++sent;
      if (r.value1 <= last_sent) fifo = false;
      last_sent = r.value1;
      max_delay = std::max(max_delay, r.t - r.value1 * c.vat.frame_interval);
    } else if (r.kind == TraceKind::PolicerDrop) {
      ++policed;
    } else if (r.kind == TraceKind::BufDrop) {
      ++buf_drops;
      if (r.value2 >= 0.0 && r.value1 >= r.value2) fresh = false;
    }
  }
  const std::uint64_t decided = sent + policed + buf_drops;
  const double fraction =
      decided ? static_cast<double>(policed) / static_cast<double>(decided) : 0.0;
  const double delay_bound =
      static_cast<double>(c.vat.app_buf_limit) * c.vat.frame_interval;

  checks.push_back(check("drop_from_head_freshness", fresh && fifo,
                         fresh && fifo, true));
  checks.push_back(check("app_buffer_delay_bound", max_delay <= delay_bound + 1e-9,
                         max_delay, delay_bound));
  if (c.bandwidth_schedule.empty()) {
    const double expected =
        std::max(0.0, 1.0 - c.link.bandwidth_bps / c.vat.bitrate_bps);
    checks.push_back(check("policer_drop_fraction",
                           std::fabs(fraction - expected) <= 0.05, fraction,
                           json::array({expected - 0.05, expected + 0.05})));
  }
  return {{"frames_sent", sent},
          {"frames_policed", policed},
          {"frames_buffer_dropped", buf_drops},
          {"policed_fraction", fraction},
          {"max_buffer_delay", max_delay},
          {"buffer_delay_bound", delay_bound}};
}

}  // namespace

std::vector<double> sample_steps(const std::vector<std::pair<double, double>>& steps,
                                 double from, double to, double period) {
  std::vector<double> out;
  std::size_t i = 0;
  double value = 0.0;
  bool have = false;
  for (std::size_t k = 0;; ++k) {
    const double t = from + static_cast<double>(k) * period;
    if (t > to + 1e-12) break;
    while (i < steps.size() && steps[i].first <= t) {
      value = steps[i].second;
      have = true;
      ++i;
    }
    if (have) out.push_back(value);
  }
  return out;
}

double coefficient_of_variation(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (mean == 0.0) return 0.0;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / n) / std::fabs(mean);
}

std::vector<StepResponse> step_responses(const ExperimentConfig& c,
                                         const std::vector<TraceRecord>& trace,
                                         std::uint64_t flow) {
  const PathRtt rtt(c, trace, flow);
  const auto layers = steps_of(trace, TraceKind::LayerChange, flow);
  std::vector<StepResponse> out;
  double previous_bps = c.link.bandwidth_bps;
  for (const BandwidthStep& step : c.bandwidth_schedule) {
    StepResponse s;
    s.at = step.at;
    s.to_bps = step.bandwidth_bps;
    s.direction = step.bandwidth_bps < previous_bps ? -1 : 1;
    previous_bps = step.bandwidth_bps;

    double current = -1.0;
    for (const auto& [t, layer] : layers) {
      if (t <= step.at) {
        current = layer;
        continue;
      }
      const bool moved = s.direction < 0 ? layer < current : layer > current;
      if (current >= 0.0 && moved) {
        s.response = t - step.at;
        s.rtt = rtt.at(t);
        break;
      }
      current = layer;
    }
    out.push_back(s);
  }
  return out;
}

json summarize(const ExperimentConfig& c, const std::vector<TraceRecord>& trace) {
  json summary;
  summary["scenario"] = std::string(to_string(c.scenario));
  summary["seed"] = c.seed;
  summary["duration"] = c.duration;
  summary["records"] = trace.size();

  json flows = json::object();
  for (const auto& [id, f] : flow_totals(trace)) {
    flows[std::to_string(id)] = {
        {"reference_tcp", is_reference(id)},
        {"delivered_bytes", f.delivered_bytes},
        {"goodput_bytes", f.goodput_bytes},
        {"throughput_bps", static_cast<double>(f.delivered_bytes) * 8.0 / c.duration},
        {"goodput_bps", static_cast<double>(f.goodput_bytes) * 8.0 / c.duration},
        {"sent_packets", f.sent_packets},
        {"dropped_packets", f.dropped_packets},
        {"marked_packets", f.marked_packets}};
  }
  summary["flows"] = std::move(flows);

  json cwnd = json::object();
  for (std::uint64_t mf : flows_with(trace, TraceKind::CwndChange)) {
    const auto steps = steps_of(trace, TraceKind::CwndChange, mf);
    json series = json::array();
    const auto samples = sample_steps(steps, steps.front().first, c.duration,
                                      kSamplePeriod);
    for (std::size_t k = 0; k < samples.size(); ++k)
      series.push_back({steps.front().first + static_cast<double>(k) * kSamplePeriod,
                        samples[k]});
    cwnd[std::to_string(mf)] = std::move(series);
  }
  summary["cwnd_series"] = {{"period", kSamplePeriod}, {"macroflows", std::move(cwnd)}};

  json occupancy = json::object();
  for (std::uint64_t flow : flows_with(trace, TraceKind::LayerChange)) {
    const auto steps = steps_of(trace, TraceKind::LayerChange, flow);
    std::map<int, double> time_in;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const double end = i + 1 < steps.size() ? steps[i + 1].first : c.duration;
      time_in[static_cast<int>(steps[i].second)] += end - steps[i].first;
    }
    json h = json::object();
    for (const auto& [layer, t] : time_in) h[std::to_string(layer)] = t;
    occupancy[std::to_string(flow)] = std::move(h);
  }
  summary["layer_occupancy"] = std::move(occupancy);

  json completions = json::array();
  for (const TraceRecord& r : trace)
    if (r.kind == TraceKind::TransferDone) completions.push_back(r.value2);
  summary["transfer_completion_times"] = completions;

  json checks = json::array();
  json metrics = json::object();
  switch (c.scenario) {
    case Scenario::TcpCompare: {
      const auto totals = flow_totals(trace);
      double cm_bps = 0.0, ref_bps = 0.0;
      for (const auto& [id, f] : totals)
        (is_reference(id) ? ref_bps : cm_bps) +=
            static_cast<double>(f.goodput_bytes) * 8.0 / c.duration;
      const double ratio = ref_bps > 0.0 ? cm_bps / ref_bps : 0.0;
      metrics = {{"cm_goodput_bps", cm_bps},
                 {"reference_goodput_bps", ref_bps},
                 {"ratio", ratio}};
      checks.push_back(check("within_factor_1.5_of_reference",
                             ratio >= 1.0 / 1.5 && ratio <= 1.5, ratio,
                             json::array({1.0 / 1.5, 1.5})));
      break;
    }
    case Scenario::Sharing: {
      std::vector<double> times = completions.get<std::vector<double>>();
      metrics["transfers_completed"] = times.size();
      if (times.size() >= 2) {
        const double rest =
            std::accumulate(times.begin() + 1, times.end(), 0.0) /
            static_cast<double>(times.size() - 1);
        const double improvement = 1.0 - rest / times.front();
        metrics["first_transfer"] = times.front();
        metrics["mean_later_transfers"] = rest;
        metrics["improvement"] = improvement;
        checks.push_back(check("later_transfers_25pct_faster",
                               improvement >= 0.25 &&
                                   times.size() == c.sharing.transfers,
                               improvement, 0.25));
      } else {
        checks.push_back(check("later_transfers_25pct_faster", false, nullptr, 0.25));
      }
      break;
    }
    case Scenario::LayeredAlf:
      metrics = layer_metrics(c, trace, checks);
      break;
    case Scenario::LayeredRate:
      metrics = layer_metrics(c, trace, checks);
      metrics.update(rate_metrics(c, trace, checks));
      break;
    case Scenario::DelayedFeedback:
      metrics = rate_metrics(c, trace, checks);
      break;
    case Scenario::FairnessEnsemble: {
      double cm_bytes = 0.0, ref_bytes = 0.0;
      for (const auto& [id, f] : flow_totals(trace, c.ensemble.warmup))
        (is_reference(id) ? ref_bytes : cm_bytes) +=
            static_cast<double>(f.goodput_bytes);
      const double share =
          cm_bytes + ref_bytes > 0.0 ? cm_bytes / (cm_bytes + ref_bytes) : 0.0;
      metrics = {{"macroflow_share", share},
                 {"macroflow_bytes", cm_bytes},
                 {"reference_bytes", ref_bytes},
                 {"flows", c.ensemble.flows},
                 {"bulk", c.ensemble.bulk}};
      checks.push_back(check("macroflow_share_50_pct_pm_20",
                             std::fabs(share - 0.5) <= 0.2, share,
                             json::array({0.3, 0.7})));
      break;
    }
    case Scenario::UdpccBasic: {
      double total = 0.0;
      const auto totals = flow_totals(trace);
      for (const auto& [id, f] : totals) total += static_cast<double>(f.delivered_bytes);
      const double fair = 1.0 / c.udpcc.flows;
      json shares = json::object();
      double worst = 0.0;
      for (const auto& [id, f] : totals) {
        const double s = total > 0.0 ? static_cast<double>(f.delivered_bytes) / total : 0.0;
        shares[std::to_string(id)] = s;
        worst = std::max(worst, std::fabs(s - fair));
      }
      metrics = {{"shares", shares}, {"max_deviation", worst}};
      checks.push_back(check("round_robin_share",
                             totals.size() == c.udpcc.flows && worst <= 0.1 * fair,
                             worst, 0.1 * fair));
      break;
    }
    case Scenario::Vat:
      metrics = vat_metrics(c, trace, checks);
      break;
  }
  summary["metrics"] = std::move(metrics);
  summary["checks"] = std::move(checks);
  return summary;
}

json operations_json(const cm::OpCounters& ops,
                     const std::vector<TraceRecord>& trace) {
  double bytes = 0.0;
  for (const TraceRecord& r : trace)
    if (r.kind == TraceKind::Deliver && !is_reference(r.flow)) bytes += r.value2;
  const double mb = bytes / 1e6;
  return {{"api_calls", ops.api_calls},
          {"bulk_calls", ops.bulk_calls},
          {"send_callbacks", ops.send_callbacks},
          {"update_callbacks", ops.update_callbacks},
          {"dispatch_batches", ops.dispatch_batches},
          {"crossings", ops.crossings},
          {"cm_delivered_bytes", bytes},
          {"crossings_per_mb", mb > 0.0 ? static_cast<double>(ops.crossings) / mb : 0.0}};
}

bool checks_pass(const json& summary) {
  if (!summary.contains("checks")) return true;
  for (const json& c : summary["checks"])
    if (!c.value("pass", false)) return false;
  return true;
}

}  // namespace harness
