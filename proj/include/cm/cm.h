/* Congestion Manager C interface.
 *
 * All functions return CM_OK or an error code; the message for the most
 * recent failure on the calling thread is available from cm_last_error().
 * A manager is not thread-safe: serialize calls on one instance.
 */
#ifndef CM_CM_H
#define CM_CM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CM_API __declspec(dllexport)
#else
#define CM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct cm_manager cm_manager;
typedef uint64_t cm_flow;

typedef enum cm_status {
  CM_OK = 0,
  CM_ERR_DUPLICATE_FLOW = 1,
  CM_ERR_UNKNOWN_FLOW = 2,
  CM_ERR_NO_CALLBACK = 3,
  CM_ERR_INVALID_THRESHOLD = 4,
  CM_ERR_INVALID_REPORT = 5,
  CM_ERR_INVALID_ARGUMENT = 6,
  CM_ERR_CONFIG = 7,
  CM_ERR_CHECK_FAILED = 8,
  CM_ERR_IO = 9,
  CM_ERR_INTERNAL = 10
} cm_status;

typedef enum cm_lossmode {
  CM_NOLOSS = 0,
  CM_LOSS_TRANSIENT = 1,
  CM_LOSS_PERSISTENT = 2,
  CM_LOSS_ECN = 3
} cm_lossmode;

typedef enum cm_protocol { CM_PROTO_TCP = 0, CM_PROTO_UDP = 1 } cm_protocol;

typedef struct cm_flowkey {
  uint32_t src_addr;
  uint16_t src_port;
  uint32_t dst_addr;
  uint16_t dst_port;
  cm_protocol protocol;
} cm_flowkey;

typedef struct cm_config {
  uint64_t default_mtu;          /* bytes */
  uint64_t initial_window_mtus;
  uint64_t initial_ssthresh;     /* bytes */
  double grant_lease;            /* seconds */
  double idle_rto_multiple;
  int linger_macroflows;         /* bool */
  int batched_callbacks;         /* bool */
  double max_tick_period;        /* seconds */
} cm_config;

/* A report's rtt is ignored unless has_rtt is nonzero. */
typedef struct cm_report {
  uint64_t nsent;
  uint64_t nrecd;
  cm_lossmode lossmode;
  int has_rtt;
  double rtt;
} cm_report;

typedef struct cm_query_result {
  double rate;      /* bytes/second */
  double srtt;      /* seconds */
  double rttvar;    /* seconds */
  double loss_rate; /* fraction */
} cm_query_result;

typedef struct cm_counters {
  uint64_t api_calls;
  uint64_t bulk_calls;
  uint64_t send_callbacks;
  uint64_t update_callbacks;
  uint64_t dispatch_batches;
  uint64_t crossings;
} cm_counters;

typedef void (*cm_send_fn)(cm_flow flow, void* user);
typedef void (*cm_update_fn)(cm_flow flow, double rate, double srtt,
                             double loss_rate, void* user);
typedef double (*cm_clock_fn)(void* user);

CM_API const char* cm_status_string(cm_status status);
CM_API const char* cm_last_error(void);
CM_API const char* cm_version(void);

CM_API void cm_config_default(cm_config* config);

/* config may be NULL for defaults. clock may be NULL, in which case time
 * stands still at 0. */
CM_API cm_status cm_manager_create(const cm_config* config, cm_clock_fn clock,
                                   void* clock_user, cm_manager** out);
CM_API void cm_manager_destroy(cm_manager* manager);

CM_API cm_status cm_open(cm_manager* m, const cm_flowkey* key, cm_flow* out);
CM_API cm_status cm_close(cm_manager* m, cm_flow flow);
CM_API cm_status cm_mtu(cm_manager* m, cm_flow flow, uint64_t* out);

CM_API cm_status cm_register_send(cm_manager* m, cm_flow flow, cm_send_fn fn,
                                  void* user);
CM_API cm_status cm_register_update(cm_manager* m, cm_flow flow,
                                    cm_update_fn fn, void* user);
CM_API cm_status cm_request(cm_manager* m, cm_flow flow);
CM_API cm_status cm_notify(cm_manager* m, cm_flow flow, uint64_t nsent);
CM_API cm_status cm_update(cm_manager* m, cm_flow flow,
                           const cm_report* report);
CM_API cm_status cm_query(cm_manager* m, cm_flow flow, cm_query_result* out);
CM_API cm_status cm_thresh(cm_manager* m, cm_flow flow, double down,
                           double up);

CM_API cm_status cm_bulk_request(cm_manager* m, const cm_flow* flows,
                                 size_t n);
CM_API cm_status cm_bulk_query(cm_manager* m, const cm_flow* flows, size_t n,
                               cm_query_result* out);
CM_API cm_status cm_bulk_notify(cm_manager* m, const cm_flow* flows,
                                const uint64_t* nsent, size_t n);
CM_API cm_status cm_bulk_update(cm_manager* m, const cm_flow* flows,
                                const cm_report* reports, size_t n);

CM_API cm_status cm_scheduler_tick(cm_manager* m, double now);
CM_API cm_status cm_tick_period(cm_manager* m, double* out);
CM_API cm_status cm_get_counters(cm_manager* m, cm_counters* out);
/* Window state of the macroflow the flow belongs to. */
CM_API cm_status cm_window(cm_manager* m, cm_flow flow, uint64_t* cwnd,
                           uint64_t* ssthresh, uint64_t* outstanding);

/* Runs one experiment described by a JSON config (see README). When out_dir
 * is non-NULL, trace.csv, summary.json and config.json are written there.
 * On success *summary_json (if requested) receives the summary, to be
 * released with cm_free_string. With check nonzero, a failed acceptance
 * check yields CM_ERR_CHECK_FAILED (the summary is still returned). */
CM_API cm_status cm_run_experiment(const char* config_json, const char* out_dir,
                                   int check, char** summary_json);
/* Sets one dotted field, e.g. "link.loss_prob=0.04", in a JSON config
 * document. The value is parsed as JSON when possible, else taken as a
 * string. The result is released with cm_free_string. */
CM_API cm_status cm_apply_override(const char* config_json,
                                   const char* assignment, char** out_json);
/* Parses and validates a config, returning it with every default filled in. */
CM_API cm_status cm_resolve_config(const char* config_json, char** resolved_json);
CM_API void cm_free_string(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CM_CM_H */
