// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "core_drivers.hpp"
#include "harness/experiment.hpp"

using harness::ExperimentConfig;
using harness::RunResult;
using harness::Scenario;
using nlohmann::json;

namespace {

int failed = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s [PRIMARY] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failed;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunResult run(Scenario s, const std::function<void(ExperimentConfig&)>& tweak = {}) {
  ExperimentConfig c = harness::default_config(s);
  if (tweak) tweak(c);
  return harness::run_experiment(c);
}

const json& metric(const RunResult& r, const char* key) {
  return r.summary.at("metrics").at(key);
}

bool check_passed(const RunResult& r, const std::string& name) {
  for (const json& c : r.summary.at("checks"))
    if (c.at("name") == name) return c.at("pass").get<bool>();
  return false;
}

std::string csv_of(const RunResult& r) {
  std::ostringstream out;
  sim::write_csv(out, r.trace);
  return out.str();
}

void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  int mismatches = 0;
  constexpr int kCases = 10000;
  for (int i = 0; i < kCases; ++i) {
    const auto c = drivers::random_window_case(rng, 200);
    if (drivers::manager_trace(c) != drivers::oracle_trace(c)) ++mismatches;
  }
  const double took = seconds_since(t0);
  report(1, "AIMD oracle equivalence", mismatches == 0 && took < 10.0,
         fmt("%d/%d sequences differ, %.2f s (limit 10 s)", mismatches, kCases,
             took));
}

void byte_counting() {
  std::mt19937_64 rng(2);
  int violations = 0;
  constexpr int kPartitions = 1000;
  // One fixed total per phase.
  drivers::PartitionCase slow{1500, 1500, 100 * 1500, 90 * 1500 + 777};
  drivers::PartitionCase avoid{1500, 10 * 1500, 2 * 1500, 400 * 1500 + 123};
  for (const auto& c : {slow, avoid}) {
    const cm::Bytes whole = drivers::cwnd_after(c, {c.total});
    for (int i = 0; i < kPartitions; ++i)
      if (drivers::cwnd_after(c, drivers::random_partition(rng, c.total)) != whole)
        ++violations;
  }
  report(2, "Byte counting / ACK division", violations == 0,
         fmt("%d of %d partitions changed the final cwnd (slow start and "
             "congestion avoidance)",
             violations, 2 * kPartitions));
}

void tcp_compatibility() {
  bool pass = true;
  std::string detail;
  double previous = INFINITY;
  for (double p : {0.001, 0.01, 0.04}) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r =
        run(Scenario::TcpCompare, [p](ExperimentConfig& c) { c.link.loss_prob = p; });
    const double took = seconds_since(t0);
    const double ratio = metric(r, "ratio").get<double>();
    const double cm_bps = metric(r, "cm_goodput_bps").get<double>();
    const bool ok = ratio >= 1.0 / 1.5 && ratio <= 1.5 && cm_bps < previous &&
                    took < 30.0;
    pass = pass && ok;
    previous = cm_bps;
    detail += fmt("p=%g cm=%.0f bps ratio=%.3f (%.1f s)%s; ", p, cm_bps, ratio,
                  took, ok ? "" : " <-");
  }
  report(3, "TCP compatibility", pass,
         detail + "bound: ratio in [0.667, 1.5], cm throughput decreasing in p");
}

void sharing() {
  const RunResult r = run(Scenario::Sharing);
  const double improvement = metric(r, "improvement").get<double>();
  report(4, "Sharing across sequential transfers",
         check_passed(r, "later_transfers_25pct_faster"),
         fmt("first %.3f s, later mean %.3f s, improvement %.1f%% (need >= 25%%, "
             "%d/9 completed)",
             metric(r, "first_transfer").get<double>(),
             metric(r, "mean_later_transfers").get<double>(), 100 * improvement,
             metric(r, "transfers_completed").get<int>()));
}

void round_robin() {
  const RunResult r = run(Scenario::UdpccBasic);
  std::string shares;
  bool pass = true;
  for (const auto& [flow, share] : metric(r, "shares").items()) {
    const double s = share.get<double>();
    pass = pass && std::fabs(s - 0.25) <= 0.025;
    shares += fmt("%s:%.4f ", flow.c_str(), s);
  }
  pass = pass && metric(r, "shares").size() == 4;
  report(5, "Round-robin fairness", pass, shares + "(need 0.25 +- 0.025)");
}

void ensemble() {
  bool pass = true;
  std::vector<double> shares;
  std::string detail;
  for (std::uint32_t k : {1u, 4u}) {
    const RunResult r =
        run(Scenario::FairnessEnsemble, [k](ExperimentConfig& c) { c.ensemble.flows = k; });
    const double share = metric(r, "macroflow_share").get<double>();
    pass = pass && share >= 0.3 && share <= 0.7;
    shares.push_back(share);
    detail += fmt("k=%u share=%.3f; ", k, share);
  }
  report(6, "Ensemble friendliness", pass,
         detail + fmt("spread %.3f; need each in [0.3, 0.7]",
                      std::fabs(shares[0] - shares[1])));
}

void layered() {
  const RunResult alf = run(Scenario::LayeredAlf);
  const RunResult rate = run(Scenario::LayeredRate);
  bool pass = true;
  std::string detail;
  auto steps = [&](const RunResult& r, const char* tag) {
    int i = 0;
    for (const json& s : metric(r, "step_responses")) {
      const bool has = !s.at("response").is_null();
      const double resp = has ? s.at("response").get<double>() : NAN;
      const double limit = s.at("limit").get<double>();
      const bool ok = has && resp <= limit;
      pass = pass && ok;
      detail += fmt("%s step %d %.3f s (limit %.3f); ", tag, i++, resp, limit);
    }
    if (i == 0) pass = false;
  };
  steps(alf, "ALF");
  steps(rate, "rate");
  const auto alf_changes = metric(alf, "layer_changes").get<std::uint64_t>();
  const auto rate_changes = metric(rate, "layer_changes").get<std::uint64_t>();
  pass = pass && alf_changes >= rate_changes;
  report(7, "Layered adaptation", pass,
         detail + fmt("layer changes ALF %llu >= rate %llu",
                      static_cast<unsigned long long>(alf_changes),
                      static_cast<unsigned long long>(rate_changes)));
}

void delayed_feedback() {
  const RunResult delayed = run(Scenario::DelayedFeedback);
  const RunResult prompt = run(Scenario::DelayedFeedback, [](ExperimentConfig& c) {
    c.feedback.batch_packets = 1;
    c.feedback.batch_timeout = 0.0;
  });
  const json& first = metric(delayed, "first_rate_callback");
  const double cv_delayed = metric(delayed, "rate_cv").get<double>();
  const double cv_prompt = metric(prompt, "rate_cv").get<double>();
  const bool pass = !first.is_null() && first.get<double>() >= 1.5 &&
                    cv_delayed > cv_prompt;
  report(8, "Delayed feedback", pass,
         fmt("first rate callback %.3f s (need >= 1.5), rate CV %.3f delayed vs "
             "%.3f undelayed; change CV %.3f vs %.3f (reported only)",
             first.is_null() ? NAN : first.get<double>(), cv_delayed, cv_prompt,
             metric(delayed, "rate_change_cv").get<double>(),
             metric(prompt, "rate_change_cv").get<double>()));
}

void vat() {
  const RunResult r = run(Scenario::Vat);
  const bool fresh = check_passed(r, "drop_from_head_freshness");
  const bool delay = check_passed(r, "app_buffer_delay_bound");
  const bool policed = check_passed(r, "policer_drop_fraction");
  report(9, "Vat pipeline", fresh && delay && policed,
         fmt("freshness %s; max buffer delay %.3f s (limit %.3f); policed "
             "fraction %.3f (need 0.50 +- 0.05)",
             fresh ? "holds" : "VIOLATED",
             metric(r, "max_buffer_delay").get<double>(),
             metric(r, "buffer_delay_bound").get<double>(),
             metric(r, "policed_fraction").get<double>()));
}

void determinism() {
  int differing = 0;
  std::string names;
  for (Scenario s : harness::all_scenarios()) {
    if (csv_of(run(s)) != csv_of(run(s))) {
      ++differing;
      names += std::string(harness::to_string(s)) + " ";
    }
  }
  report(10, "Determinism", differing == 0,
         fmt("%d of %zu scenarios produced differing trace.csv %s", differing,
             harness::all_scenarios().size(), names.c_str()));
}

void bulk_accounting() {
  const RunResult per_flow = run(Scenario::FairnessEnsemble);
  const RunResult bulk =
      run(Scenario::FairnessEnsemble, [](ExperimentConfig& c) { c.ensemble.bulk = true; });
  const double a = per_flow.summary.at("operations").at("crossings_per_mb").get<double>();
  const double b = bulk.summary.at("operations").at("crossings_per_mb").get<double>();
  const bool same = csv_of(per_flow) == csv_of(bulk);
  report(11, "Bulk-call accounting", same && b < a,
         fmt("crossings/MB bulk %.1f vs per-flow %.1f; traces %s", b, a,
             same ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
  oracle_equivalence();
  byte_counting();
  tcp_compatibility();
  sharing();
  round_robin();
  ensemble();
  layered();
  delayed_feedback();
  vat();
  determinism();
  bulk_accounting();
  std::printf("%d of 11 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
