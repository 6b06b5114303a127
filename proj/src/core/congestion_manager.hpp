#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <vector>

#include "core/aimd_controller.hpp"
#include "core/types.hpp"

namespace cm {

struct ManagerConfig {
  Bytes default_mtu = 1500;
  Bytes initial_window_mtus = 1;
  Bytes initial_ssthresh = 64 * 1024;
  /// A grant not followed by cm_notify within this long is reclaimed by the
  /// scheduler tick.
  Seconds grant_lease = 0.05;
  /// Idle restart after this many RTOs without a transmission.
  double idle_rto_multiple = 4.0;
  /// Keep a memberless macroflow until its state would have decayed anyway,
  /// so that back-to-back connections to one host share congestion state.
  bool linger_macroflows = false;
  /// Count one boundary crossing per dispatch batch instead of one per
  /// callback (models a single "which flows may send" query).
  bool batched_callbacks = false;
  Seconds max_tick_period = 0.01;
};

using Clock = std::function<Seconds()>;
using MtuLookup = std::function<Bytes(const FlowKey&)>;

/// Hooks for tracing. All default to no-ops.
class ManagerObserver {
 public:
  virtual ~ManagerObserver() = default;
  virtual void on_grant(FlowId, MacroflowId) {}
  virtual void on_window_change(MacroflowId, Bytes /*cwnd*/,
                                Bytes /*ssthresh*/) {}
  virtual void on_rate_callback(FlowId, double /*rate*/, Seconds /*srtt*/) {}
};

struct OpCounters {
  std::uint64_t api_calls = 0;
  std::uint64_t bulk_calls = 0;
  std::uint64_t send_callbacks = 0;
  std::uint64_t update_callbacks = 0;
  std::uint64_t dispatch_batches = 0;
  std::uint64_t crossings = 0;
};

struct FlowSnapshot {
  FlowId id;
  FlowKey key;
  MacroflowId macroflow;
  FlowMode mode = FlowMode::Buffered;
  bool open = false;
  std::uint64_t pending_requests = 0;
  std::uint64_t grants = 0;
  double thresh_down = 0.0;
  double thresh_up = 0.0;
  double last_notified_rate = 0.0;
};

struct MacroflowSnapshot {
  MacroflowId id;
  HostId dst_addr = 0;
  Bytes mtu = 0;
  Bytes cwnd = 0;
  Bytes ssthresh = 0;
  Bytes outstanding = 0;
  Bytes reserved = 0;
  Phase phase = Phase::SlowStart;
  Seconds srtt = 0.0;
  Seconds rttvar = 0.0;
  double loss_rate = 0.0;
  std::vector<FlowId> members;
  std::size_t rr_cursor = 0;
  Seconds last_send_time = 0.0;
};

/// Integrated congestion state shared by every flow to a destination host.
///
/// Single execution context: callbacks run synchronously once the outermost
/// API call has finished its own work, never in the middle of it. Calls made
/// from inside a callback are applied immediately; any grants they enable are
/// delivered in the next dispatch batch.
class CongestionManager {
 public:
  explicit CongestionManager(ManagerConfig config = {}, Clock clock = {},
                             MtuLookup mtu_lookup = {});

  CongestionManager(const CongestionManager&) = delete;
  CongestionManager& operator=(const CongestionManager&) = delete;

  FlowId open(const FlowKey& key);
  void close(FlowId flow);
  Bytes mtu(FlowId flow);

  void request(FlowId flow);
  void register_send(FlowId flow, SendCallback cb);
  void register_update(FlowId flow, UpdateCallback cb);
  void thresh(FlowId flow, double down, double up);
  void notify(FlowId flow, Bytes nsent);
  void update(FlowId flow, const FeedbackReport& report);
  QueryResult query(FlowId flow);

  void bulk_request(std::span<const FlowId> flows);
  std::vector<QueryResult> bulk_query(std::span<const FlowId> flows);
  void bulk_notify(std::span<const FlowId> flows, std::span<const Bytes> nsent);
  void bulk_update(std::span<const FlowId> flows,
                   std::span<const FeedbackReport> reports);

  /// Background duties: reclaim lapsed grants, idle restart, and redispatch.
  void scheduler_tick(Seconds now);
  /// min(max_tick_period, srtt/2) over live macroflows.
  Seconds tick_period() const;

  void set_observer(ManagerObserver* observer) { observer_ = observer; }
  /// Runs after every callback of a dispatch batch has returned and before
  /// the next batch is collected. Clients that coalesce their per-grant
  /// calls into bulk calls flush them here.
  void set_batch_end_hook(std::function<void()> hook) {
    batch_end_hook_ = std::move(hook);
  }
  const OpCounters& counters() const { return counters_; }
  const ManagerConfig& config() const { return config_; }

  FlowSnapshot flow_info(FlowId flow) const;
  MacroflowSnapshot macroflow_info(MacroflowId id) const;
  bool macroflow_exists(MacroflowId id) const;
  std::size_t macroflow_count() const { return macroflows_.size(); }

 private:
  struct Flow {
    FlowId id;
    FlowKey key;
    MacroflowId macroflow;
    FlowMode mode = FlowMode::Buffered;
    bool open = true;
    std::uint64_t pending = 0;
    std::uint64_t grants = 0;
    Bytes charged = 0;
    SendCallback send_cb;
    UpdateCallback update_cb;
    double thresh_down = 0.5;
    double thresh_up = 2.0;
    double last_notified_rate = 0.0;
    std::deque<Seconds> unnotified_grants;
  };

  struct Macroflow {
    MacroflowId id;
    HostId dst_addr = 0;
    AimdController controller;
    Bytes outstanding = 0;
    Bytes reserved = 0;
    std::vector<FlowId> members;
    std::size_t rr_cursor = 0;
    Seconds last_send_time = 0.0;
  };

  struct RateNotice {
    double rate;
    Seconds srtt;
    double loss_rate;
  };

  template <class Fn>
  decltype(auto) api_call(Fn&& fn);

  Flow& open_flow(FlowId id);
  Flow& any_flow(FlowId id);
  Macroflow& macroflow_of(const Flow& flow);
  Seconds now() const { return clock_ ? clock_() : 0.0; }

  void do_request(FlowId id);
  QueryResult do_query(FlowId id);
  void do_notify(FlowId id, Bytes nsent);
  void do_update(FlowId id, const FeedbackReport& report);

  double flow_rate(const Flow& flow, const Macroflow& mf) const;
  void evaluate_thresholds(Macroflow& mf);
  void release_grant(Flow& flow, Macroflow& mf);
  void window_changed(Macroflow& mf);
  void destroy_macroflow(MacroflowId id);

  std::vector<FlowId> collect_grants();
  void drain();

  ManagerConfig config_;
  Clock clock_;
  MtuLookup mtu_lookup_;
  ManagerObserver* observer_ = nullptr;
  std::function<void()> batch_end_hook_;
  OpCounters counters_;

  std::map<FlowId, Flow> flows_;
  std::map<FlowKey, FlowId> open_keys_;
  std::map<MacroflowId, Macroflow> macroflows_;
  std::map<HostId, MacroflowId> by_destination_;
  std::map<FlowId, RateNotice> pending_notices_;

  std::uint64_t next_flow_ = 1;
  std::uint64_t next_macroflow_ = 1;
  int depth_ = 0;
  bool draining_ = false;
};

}  // namespace cm
