#include "cm/cm.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "core/congestion_manager.hpp"
#include "harness/experiment.hpp"
#include "harness/summary.hpp"

struct cm_manager {
  explicit cm_manager(cm::ManagerConfig config, cm::Clock clock)
      : impl(config, std::move(clock)) {}
  cm::CongestionManager impl;
};

namespace {

thread_local std::string last_error;

cm_status fail(cm_status status, const std::string& message) {
  last_error = message;
  return status;
}

cm_status from_errc(cm::Errc code) {
  switch (code) {
    case cm::Errc::DuplicateFlow: return CM_ERR_DUPLICATE_FLOW;
    case cm::Errc::UnknownFlow: return CM_ERR_UNKNOWN_FLOW;
    case cm::Errc::NoCallbackRegistered: return CM_ERR_NO_CALLBACK;
    case cm::Errc::InvalidThreshold: return CM_ERR_INVALID_THRESHOLD;
    case cm::Errc::InvalidReport: return CM_ERR_INVALID_REPORT;
    case cm::Errc::InvalidArgument: return CM_ERR_INVALID_ARGUMENT;
  }
  return CM_ERR_INTERNAL;
}

/// Runs `fn`, translating exceptions into status codes.
template <class Fn>
cm_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CM_OK;
  } catch (const cm::Error& e) {
    return fail(from_errc(e.code()), e.what());
  } catch (const harness::ConfigError& e) {
    return fail(CM_ERR_CONFIG, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(CM_ERR_CONFIG, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(CM_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(CM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(CM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CM_ERR_INTERNAL, "unknown exception");
  }
}

#define CM_REQUIRE(cond, what)                                   \
  do {                                                           \
    if (!(cond)) return fail(CM_ERR_INVALID_ARGUMENT, what);     \
  } while (0)

cm::FlowId id(cm_flow f) { return cm::FlowId{f}; }

cm::FeedbackReport to_report(const cm_report& r) {
  cm::FeedbackReport out;
  out.nsent = r.nsent;
  out.nrecd = r.nrecd;
  switch (r.lossmode) {
    case CM_NOLOSS: out.lossmode = cm::LossMode::NoLoss; break;
    case CM_LOSS_TRANSIENT: out.lossmode = cm::LossMode::Transient; break;
    case CM_LOSS_PERSISTENT: out.lossmode = cm::LossMode::Persistent; break;
    case CM_LOSS_ECN: out.lossmode = cm::LossMode::Ecn; break;
    default:
      throw cm::Error(cm::Errc::InvalidReport, "unknown loss mode");
  }
  if (r.has_rtt) out.rtt = r.rtt;
  return out;
}

cm_query_result to_c(const cm::QueryResult& q) {
  return cm_query_result{q.rate, q.srtt, q.rttvar, q.loss_rate};
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* cm_status_string(cm_status status) {
  switch (status) {
    case CM_OK: return "ok";
    case CM_ERR_DUPLICATE_FLOW: return "duplicate flow";
    case CM_ERR_UNKNOWN_FLOW: return "unknown flow";
    case CM_ERR_NO_CALLBACK: return "no send callback registered";
    case CM_ERR_INVALID_THRESHOLD: return "invalid threshold";
    case CM_ERR_INVALID_REPORT: return "invalid report";
    case CM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CM_ERR_CONFIG: return "configuration error";
    case CM_ERR_CHECK_FAILED: return "acceptance check failed";
    case CM_ERR_IO: return "i/o error";
    case CM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* cm_last_error(void) { return last_error.c_str(); }

const char* cm_version(void) { return "0.1.0"; }

void cm_config_default(cm_config* config) {
  if (!config) return;
  const cm::ManagerConfig d;
  *config = cm_config{d.default_mtu,        d.initial_window_mtus,
                      d.initial_ssthresh,   d.grant_lease,
                      d.idle_rto_multiple,  d.linger_macroflows ? 1 : 0,
                      d.batched_callbacks ? 1 : 0, d.max_tick_period};
}

cm_status cm_manager_create(const cm_config* config, cm_clock_fn clock,
                            void* clock_user, cm_manager** out) {
  CM_REQUIRE(out, "out must not be null");
  *out = nullptr;
  cm_config c;
  cm_config_default(&c);
  if (config) c = *config;
  return guarded([&] {
    cm::ManagerConfig m;
    m.default_mtu = c.default_mtu;
    m.initial_window_mtus = c.initial_window_mtus;
    m.initial_ssthresh = c.initial_ssthresh;
    m.grant_lease = c.grant_lease;
    m.idle_rto_multiple = c.idle_rto_multiple;
    m.linger_macroflows = c.linger_macroflows != 0;
    m.batched_callbacks = c.batched_callbacks != 0;
    m.max_tick_period = c.max_tick_period;
    cm::Clock fn;
    if (clock) fn = [clock, clock_user] { return clock(clock_user); };
    *out = new cm_manager(m, std::move(fn));
  });
}

void cm_manager_destroy(cm_manager* manager) { delete manager; }

cm_status cm_open(cm_manager* m, const cm_flowkey* key, cm_flow* out) {
  CM_REQUIRE(m && key && out, "null argument");
  return guarded([&] {
    const cm::FlowKey k{key->src_addr, key->src_port, key->dst_addr,
                        key->dst_port,
                        key->protocol == CM_PROTO_UDP ? cm::Protocol::Udp
                                                      : cm::Protocol::Tcp};
    *out = m->impl.open(k).value;
  });
}

cm_status cm_close(cm_manager* m, cm_flow flow) {
  CM_REQUIRE(m, "null manager");
  return guarded([&] { m->impl.close(id(flow)); });
}

cm_status cm_mtu(cm_manager* m, cm_flow flow, uint64_t* out) {
  CM_REQUIRE(m && out, "null argument");
  return guarded([&] { *out = m->impl.mtu(id(flow)); });
}

cm_status cm_register_send(cm_manager* m, cm_flow flow, cm_send_fn fn,
                           void* user) {
  CM_REQUIRE(m && fn, "null argument");
  return guarded([&] {
    m->impl.register_send(id(flow), [fn, user](cm::FlowId f) { fn(f.value, user); });
  });
}

cm_status cm_register_update(cm_manager* m, cm_flow flow, cm_update_fn fn,
                             void* user) {
  CM_REQUIRE(m && fn, "null argument");
  return guarded([&] {
    m->impl.register_update(
        id(flow), [fn, user](cm::FlowId f, double rate, double srtt, double loss) {
          fn(f.value, rate, srtt, loss, user);
        });
  });
}

cm_status cm_request(cm_manager* m, cm_flow flow) {
  CM_REQUIRE(m, "null manager");
  return guarded([&] { m->impl.request(id(flow)); });
}

cm_status cm_notify(cm_manager* m, cm_flow flow, uint64_t nsent) {
  CM_REQUIRE(m, "null manager");
  return guarded([&] { m->impl.notify(id(flow), nsent); });
}

cm_status cm_update(cm_manager* m, cm_flow flow, const cm_report* report) {
  CM_REQUIRE(m && report, "null argument");
  return guarded([&] { m->impl.update(id(flow), to_report(*report)); });
}

cm_status cm_query(cm_manager* m, cm_flow flow, cm_query_result* out) {
  CM_REQUIRE(m && out, "null argument");
  return guarded([&] { *out = to_c(m->impl.query(id(flow))); });
}

cm_status cm_thresh(cm_manager* m, cm_flow flow, double down, double up) {
  CM_REQUIRE(m, "null manager");
  return guarded([&] { m->impl.thresh(id(flow), down, up); });
}

cm_status cm_bulk_request(cm_manager* m, const cm_flow* flows, size_t n) {
  CM_REQUIRE(m && (flows || n == 0), "null argument");
  return guarded([&] {
    std::vector<cm::FlowId> ids(flows, flows + n);
    m->impl.bulk_request(ids);
  });
}

cm_status cm_bulk_query(cm_manager* m, const cm_flow* flows, size_t n,
                        cm_query_result* out) {
  CM_REQUIRE(m && ((flows && out) || n == 0), "null argument");
  return guarded([&] {
    std::vector<cm::FlowId> ids(flows, flows + n);
    const auto results = m->impl.bulk_query(ids);
    for (std::size_t i = 0; i < results.size(); ++i) out[i] = to_c(results[i]);
  });
}

cm_status cm_bulk_notify(cm_manager* m, const cm_flow* flows,
                         const uint64_t* nsent, size_t n) {
  CM_REQUIRE(m && ((flows && nsent) || n == 0), "null argument");
  return guarded([&] {
    std::vector<cm::FlowId> ids(flows, flows + n);
    std::vector<cm::Bytes> bytes(nsent, nsent + n);
    m->impl.bulk_notify(ids, bytes);
  });
}

cm_status cm_bulk_update(cm_manager* m, const cm_flow* flows,
                         const cm_report* reports, size_t n) {
  CM_REQUIRE(m && ((flows && reports) || n == 0), "null argument");
  return guarded([&] {
    std::vector<cm::FlowId> ids(flows, flows + n);
    std::vector<cm::FeedbackReport> rs;
    rs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rs.push_back(to_report(reports[i]));
    m->impl.bulk_update(ids, rs);
  });
}

cm_status cm_scheduler_tick(cm_manager* m, double now) {
  CM_REQUIRE(m, "null manager");
  return guarded([&] { m->impl.scheduler_tick(now); });
}

cm_status cm_tick_period(cm_manager* m, double* out) {
  CM_REQUIRE(m && out, "null argument");
  return guarded([&] { *out = m->impl.tick_period(); });
}

cm_status cm_get_counters(cm_manager* m, cm_counters* out) {
  CM_REQUIRE(m && out, "null argument");
  const cm::OpCounters& c = m->impl.counters();
  *out = cm_counters{c.api_calls,     c.bulk_calls,       c.send_callbacks,
                     c.update_callbacks, c.dispatch_batches, c.crossings};
  return CM_OK;
}

cm_status cm_window(cm_manager* m, cm_flow flow, uint64_t* cwnd,
                    uint64_t* ssthresh, uint64_t* outstanding) {
  CM_REQUIRE(m, "null manager");
  return guarded([&] {
    const auto mf = m->impl.macroflow_info(m->impl.flow_info(id(flow)).macroflow);
    if (cwnd) *cwnd = mf.cwnd;
    if (ssthresh) *ssthresh = mf.ssthresh;
    if (outstanding) *outstanding = mf.outstanding;
  });
}

cm_status cm_run_experiment(const char* config_json, const char* out_dir,
                            int check, char** summary_json) {
  CM_REQUIRE(config_json, "config must not be null");
  if (summary_json) *summary_json = nullptr;
  bool passed = true;
  const cm_status status = guarded([&] {
    const auto config = harness::parse_config(nlohmann::json::parse(config_json));
    const harness::RunResult result = harness::run_experiment(config);
    if (out_dir) harness::write_outputs(result, out_dir);
    passed = harness::checks_pass(result.summary);
    if (summary_json) *summary_json = dup_string(result.summary.dump(2));
  });
  if (status != CM_OK) return status;
  if (check && !passed)
    return fail(CM_ERR_CHECK_FAILED, "one or more acceptance checks failed");
  return CM_OK;
}

cm_status cm_apply_override(const char* config_json, const char* assignment,
                            char** out_json) {
  CM_REQUIRE(config_json && assignment && out_json, "null argument");
  *out_json = nullptr;
  return guarded([&] {
    auto doc = nlohmann::json::parse(config_json);
    harness::apply_override(doc, assignment);
    *out_json = dup_string(doc.dump(2));
  });
}

cm_status cm_resolve_config(const char* config_json, char** resolved_json) {
  CM_REQUIRE(config_json && resolved_json, "null argument");
  *resolved_json = nullptr;
  return guarded([&] {
    const auto config = harness::parse_config(nlohmann::json::parse(config_json));
    *resolved_json = dup_string(harness::to_json(config).dump(2));
  });
}

void cm_free_string(char* s) { std::free(s); }

}  // extern "C"
