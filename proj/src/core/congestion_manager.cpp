#include "core/congestion_manager.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace cm {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::DuplicateFlow: return "duplicate flow";
    case Errc::UnknownFlow: return "unknown flow";
    case Errc::NoCallbackRegistered: return "no send callback registered";
    case Errc::InvalidThreshold: return "invalid threshold";
    case Errc::InvalidReport: return "invalid report";
    case Errc::InvalidArgument: return "invalid argument";
  }
  return "unknown error";
}

const char* to_string(LossMode mode) {
  switch (mode) {
    case LossMode::NoLoss: return "none";
    case LossMode::Transient: return "transient";
    case LossMode::Persistent: return "persistent";
    case LossMode::Ecn: return "ecn";
  }
  return "?";
}

CongestionManager::CongestionManager(ManagerConfig config, Clock clock,
                                     MtuLookup mtu_lookup)
    : config_(config),
      clock_(std::move(clock)),
      mtu_lookup_(std::move(mtu_lookup)) {
  if (config_.default_mtu == 0 || config_.initial_window_mtus == 0)
    throw Error(Errc::InvalidArgument, "mtu and initial window must be > 0");
}

template <class Fn>
decltype(auto) CongestionManager::api_call(Fn&& fn) {
  ++depth_;
  auto finish = [this] {
    if (--depth_ == 0) drain();
  };
  if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
    try {
      fn();
    } catch (...) {
      finish();
      throw;
    }
    finish();
  } else {
    std::invoke_result_t<Fn> result;
    try {
      result = fn();
    } catch (...) {
      finish();
      throw;
    }
    finish();
    return result;
  }
}

CongestionManager::Flow& CongestionManager::any_flow(FlowId id) {
  auto it = flows_.find(id);
  if (it == flows_.end())
    throw Error(Errc::UnknownFlow, "flow " + std::to_string(id.value));
  return it->second;
}

CongestionManager::Flow& CongestionManager::open_flow(FlowId id) {
  Flow& flow = any_flow(id);
  if (!flow.open)
    throw Error(Errc::UnknownFlow,
                "flow " + std::to_string(id.value) + " is closed");
  return flow;
}

CongestionManager::Macroflow& CongestionManager::macroflow_of(
    const Flow& flow) {
  return macroflows_.at(flow.macroflow);
}

// --- state management -------------------------------------------------------

FlowId CongestionManager::open(const FlowKey& key) {
  ++counters_.api_calls;
  ++counters_.crossings;
  return api_call([&] {
    if (open_keys_.contains(key))
      throw Error(Errc::DuplicateFlow, "flow key already open");

    MacroflowId mf_id;
    if (auto it = by_destination_.find(key.dst_addr);
        it != by_destination_.end()) {
      mf_id = it->second;
    } else {
      const Bytes mtu = mtu_lookup_ ? mtu_lookup_(key) : config_.default_mtu;
      if (mtu == 0) throw Error(Errc::InvalidArgument, "route mtu is zero");
      mf_id = MacroflowId{next_macroflow_++};
      Macroflow mf{mf_id, key.dst_addr,
                   AimdController(mtu, config_.initial_window_mtus * mtu,
                                  config_.initial_ssthresh),
                   0, 0, {}, 0, now()};
      macroflows_.emplace(mf_id, std::move(mf));
      by_destination_.emplace(key.dst_addr, mf_id);
    }

    const FlowId id{next_flow_++};
    Flow flow;
    flow.id = id;
    flow.key = key;
    flow.macroflow = mf_id;
    flows_.emplace(id, std::move(flow));
    open_keys_.emplace(key, id);
    macroflows_.at(mf_id).members.push_back(id);
    return id;
  });
}

void CongestionManager::close(FlowId id) {
  ++counters_.api_calls;
  ++counters_.crossings;
  api_call([&] {
    Flow& flow = any_flow(id);
    if (!flow.open) return;
    Macroflow& mf = macroflow_of(flow);
    while (!flow.unnotified_grants.empty()) release_grant(flow, mf);
    mf.outstanding -= std::min(flow.charged, mf.outstanding);
    flow.charged = 0;
    flow.pending = 0;
    flow.open = false;
    flow.send_cb = nullptr;
    flow.update_cb = nullptr;
    pending_notices_.erase(id);
    open_keys_.erase(flow.key);

    auto& members = mf.members;
    const auto pos = std::find(members.begin(), members.end(), id);
    const auto index = static_cast<std::size_t>(pos - members.begin());
    members.erase(pos);
    if (index < mf.rr_cursor) --mf.rr_cursor;
    if (mf.rr_cursor >= members.size()) mf.rr_cursor = 0;

    if (members.empty() && !config_.linger_macroflows)
      destroy_macroflow(mf.id);
  });
}

Bytes CongestionManager::mtu(FlowId id) {
  ++counters_.api_calls;
  ++counters_.crossings;
  return api_call(
      [&] { return macroflow_of(open_flow(id)).controller.mtu(); });
}

void CongestionManager::destroy_macroflow(MacroflowId id) {
  auto it = macroflows_.find(id);
  if (it == macroflows_.end()) return;
  by_destination_.erase(it->second.dst_addr);
  macroflows_.erase(it);
}

// --- data transmission ------------------------------------------------------

void CongestionManager::do_request(FlowId id) {
  Flow& flow = open_flow(id);
  if (!flow.send_cb)
    throw Error(Errc::NoCallbackRegistered,
                "flow " + std::to_string(id.value) + " has no send callback");
  ++flow.pending;
}

void CongestionManager::request(FlowId id) {
  ++counters_.api_calls;
  ++counters_.crossings;
  api_call([&] { do_request(id); });
}

void CongestionManager::register_send(FlowId id, SendCallback cb) {
  ++counters_.api_calls;
  ++counters_.crossings;
  api_call([&] {
    Flow& flow = open_flow(id);
    flow.send_cb = std::move(cb);
    flow.mode = FlowMode::RequestCallback;
  });
}

void CongestionManager::register_update(FlowId id, UpdateCallback cb) {
  ++counters_.api_calls;
  ++counters_.crossings;
  api_call([&] {
    Flow& flow = open_flow(id);
    flow.update_cb = std::move(cb);
    if (flow.mode == FlowMode::Buffered) flow.mode = FlowMode::RateCallback;
    evaluate_thresholds(macroflow_of(flow));
  });
}

void CongestionManager::thresh(FlowId id, double down, double up) {
  ++counters_.api_calls;
  ++counters_.crossings;
  api_call([&] {
    Flow& flow = open_flow(id);
    if (!(down > 0.0 && down <= 1.0 && up >= 1.0))
      throw Error(Errc::InvalidThreshold,
                  "thresholds need 0 < down <= 1 <= up");
    flow.thresh_down = down;
    flow.thresh_up = up;
  });
}

void CongestionManager::release_grant(Flow& flow, Macroflow& mf) {
  flow.unnotified_grants.pop_front();
  mf.reserved -= std::min(mf.reserved, mf.controller.mtu());
}

void CongestionManager::do_notify(FlowId id, Bytes nsent) {
  Flow& flow = open_flow(id);
  Macroflow& mf = macroflow_of(flow);
  if (!flow.unnotified_grants.empty()) release_grant(flow, mf);
  mf.outstanding += nsent;
  flow.charged += nsent;
  if (nsent > 0) mf.last_send_time = now();
}

void CongestionManager::notify(FlowId id, Bytes nsent) {
  ++counters_.api_calls;
  ++counters_.crossings;
  api_call([&] { do_notify(id, nsent); });
}

// --- feedback ---------------------------------------------------------------

void CongestionManager::window_changed(Macroflow& mf) {
  if (observer_)
    observer_->on_window_change(mf.id, mf.controller.cwnd(),
                                mf.controller.ssthresh());
}

void CongestionManager::do_update(FlowId id, const FeedbackReport& report) {
  Flow& flow = open_flow(id);
  if (report.nrecd > report.nsent)
    throw Error(Errc::InvalidReport, "nrecd exceeds nsent");
  if (report.rtt && !(*report.rtt > 0.0))
    throw Error(Errc::InvalidReport, "rtt sample must be positive");

  Macroflow& mf = macroflow_of(flow);
  mf.outstanding -= std::min(mf.outstanding, report.nsent);
  flow.charged -= std::min(flow.charged, report.nsent);
  if (mf.controller.on_report(report, now())) window_changed(mf);
  evaluate_thresholds(mf);
}

void CongestionManager::update(FlowId id, const FeedbackReport& report) {
  ++counters_.api_calls;
  ++counters_.crossings;
  api_call([&] { do_update(id, report); });
}

// --- querying ---------------------------------------------------------------

double CongestionManager::flow_rate(const Flow& flow,
                                    const Macroflow& mf) const {
  if (!mf.controller.has_rtt() || mf.controller.srtt() <= 0.0) return 0.0;
  std::size_t active = flow.pending > 0 ? 0 : 1;
  for (FlowId member : mf.members)
    if (flows_.at(member).pending > 0) ++active;
  return static_cast<double>(mf.controller.cwnd()) / mf.controller.srtt() /
         static_cast<double>(active);
}

QueryResult CongestionManager::do_query(FlowId id) {
  const Flow& flow = open_flow(id);
  const Macroflow& mf = macroflows_.at(flow.macroflow);
  return QueryResult{flow_rate(flow, mf), mf.controller.srtt(),
                     mf.controller.rttvar(), mf.controller.loss_rate()};
}

QueryResult CongestionManager::query(FlowId id) {
  ++counters_.api_calls;
  ++counters_.crossings;
  return api_call([&] { return do_query(id); });
}

void CongestionManager::evaluate_thresholds(Macroflow& mf) {
  for (FlowId member : mf.members) {
    Flow& flow = flows_.at(member);
    if (!flow.update_cb) continue;
    const double rate = flow_rate(flow, mf);
    const double last = flow.last_notified_rate;
    const bool fire = last <= 0.0 ? rate > 0.0
                                  : (rate <= last * flow.thresh_down ||
                                     rate >= last * flow.thresh_up);
    if (!fire) continue;
    flow.last_notified_rate = rate;
    pending_notices_[member] = RateNotice{rate, mf.controller.srtt(),
                                          mf.controller.loss_rate()};
  }
}

// --- bulk variants ----------------------------------------------------------

void CongestionManager::bulk_request(std::span<const FlowId> flows) {
  ++counters_.bulk_calls;
  ++counters_.crossings;
  api_call([&] {
    for (FlowId id : flows) do_request(id);
  });
}

std::vector<QueryResult> CongestionManager::bulk_query(
    std::span<const FlowId> flows) {
  ++counters_.bulk_calls;
  ++counters_.crossings;
  return api_call([&] {
    std::vector<QueryResult> out;
    out.reserve(flows.size());
    for (FlowId id : flows) out.push_back(do_query(id));
    return out;
  });
}

void CongestionManager::bulk_notify(std::span<const FlowId> flows,
                                    std::span<const Bytes> nsent) {
  ++counters_.bulk_calls;
  ++counters_.crossings;
  api_call([&] {
    if (flows.size() != nsent.size())
      throw Error(Errc::InvalidArgument, "bulk_notify length mismatch");
    for (std::size_t i = 0; i < flows.size(); ++i)
      do_notify(flows[i], nsent[i]);
  });
}

void CongestionManager::bulk_update(std::span<const FlowId> flows,
                                    std::span<const FeedbackReport> reports) {
  ++counters_.bulk_calls;
  ++counters_.crossings;
  api_call([&] {
    if (flows.size() != reports.size())
      throw Error(Errc::InvalidArgument, "bulk_update length mismatch");
    for (std::size_t i = 0; i < flows.size(); ++i)
      do_update(flows[i], reports[i]);
  });
}

// --- scheduler --------------------------------------------------------------

void CongestionManager::scheduler_tick(Seconds t) {
  ++depth_;
  std::vector<MacroflowId> expired;
  for (auto& [id, mf] : macroflows_) {
    for (FlowId member : mf.members) {
      Flow& flow = flows_.at(member);
      while (!flow.unnotified_grants.empty() &&
             t - flow.unnotified_grants.front() >= config_.grant_lease)
        release_grant(flow, mf);
    }
    const Seconds idle_limit =
        config_.idle_rto_multiple * mf.controller.rto();
    if (t - mf.last_send_time > idle_limit) {
      if (mf.members.empty()) {
        expired.push_back(id);
        continue;
      }
      if (mf.controller.restart()) {
        window_changed(mf);
        evaluate_thresholds(mf);
      }
    }
  }
  for (MacroflowId id : expired) destroy_macroflow(id);
  --depth_;
  if (depth_ == 0) drain();
}

Seconds CongestionManager::tick_period() const {
  Seconds period = config_.max_tick_period;
  for (const auto& [id, mf] : macroflows_)
    if (mf.controller.has_rtt())
      period = std::min(period, mf.controller.srtt() / 2.0);
  return period;
}

std::vector<FlowId> CongestionManager::collect_grants() {
  std::vector<FlowId> batch;
  const Seconds t = now();
  for (auto& [id, mf] : macroflows_) {
    const Bytes mtu = mf.controller.mtu();
    const std::size_t n = mf.members.size();
    // A grant is issued while any of the window is unused, so a flow sending
    // packets smaller than the MTU can still fill it; outstanding may end up
    // to one MTU above cwnd.
    while (n > 0 && mf.outstanding + mf.reserved < mf.controller.cwnd()) {
      std::size_t chosen = n;
      for (std::size_t step = 0; step < n; ++step) {
        const std::size_t idx = (mf.rr_cursor + step) % n;
        if (flows_.at(mf.members[idx]).pending > 0) {
          chosen = idx;
          break;
        }
      }
      if (chosen == n) break;
      Flow& flow = flows_.at(mf.members[chosen]);
      --flow.pending;
      ++flow.grants;
      flow.unnotified_grants.push_back(t);
      mf.reserved += mtu;
      mf.rr_cursor = (chosen + 1) % n;
      batch.push_back(flow.id);
    }
  }
  return batch;
}

void CongestionManager::drain() {
  if (draining_) return;
  draining_ = true;
  try {
    for (;;) {
      std::vector<FlowId> grants = collect_grants();
      std::map<FlowId, RateNotice> notices = std::exchange(pending_notices_, {});
      if (grants.empty() && notices.empty()) break;
      ++counters_.dispatch_batches;
      if (config_.batched_callbacks) ++counters_.crossings;

      for (FlowId id : grants) {
        Flow& flow = flows_.at(id);
        if (!flow.open) continue;
        if (!flow.send_cb) {
          release_grant(flow, macroflow_of(flow));
          continue;
        }
        ++counters_.send_callbacks;
        if (!config_.batched_callbacks) ++counters_.crossings;
        if (observer_) observer_->on_grant(id, flow.macroflow);
        SendCallback cb = flow.send_cb;
        cb(id);
      }
      for (auto& [id, notice] : notices) {
        auto it = flows_.find(id);
        if (it == flows_.end() || !it->second.open || !it->second.update_cb)
          continue;
        ++counters_.update_callbacks;
        if (!config_.batched_callbacks) ++counters_.crossings;
        if (observer_) observer_->on_rate_callback(id, notice.rate, notice.srtt);
        UpdateCallback cb = it->second.update_cb;
        cb(id, notice.rate, notice.srtt, notice.loss_rate);
      }
      if (batch_end_hook_) batch_end_hook_();
    }
  } catch (...) {
    draining_ = false;
    throw;
  }
  draining_ = false;
}

// --- introspection ----------------------------------------------------------

FlowSnapshot CongestionManager::flow_info(FlowId id) const {
  auto it = flows_.find(id);
  if (it == flows_.end())
    throw Error(Errc::UnknownFlow, "flow " + std::to_string(id.value));
  const Flow& f = it->second;
  return FlowSnapshot{f.id,      f.key,         f.macroflow,
                      f.mode,    f.open,        f.pending,
                      f.grants,  f.thresh_down, f.thresh_up,
                      f.last_notified_rate};
}

bool CongestionManager::macroflow_exists(MacroflowId id) const {
  return macroflows_.contains(id);
}

MacroflowSnapshot CongestionManager::macroflow_info(MacroflowId id) const {
  auto it = macroflows_.find(id);
  if (it == macroflows_.end())
    throw Error(Errc::InvalidArgument,
                "macroflow " + std::to_string(id.value) + " does not exist");
  const Macroflow& mf = it->second;
  const AimdController& c = mf.controller;
  return MacroflowSnapshot{mf.id,          mf.dst_addr,  c.mtu(),
                           c.cwnd(),       c.ssthresh(), mf.outstanding,
                           mf.reserved,    c.phase(),    c.srtt(),
                           c.rttvar(),     c.loss_rate(), mf.members,
                           mf.rr_cursor,   mf.last_send_time};
}

}  // namespace cm
