/* Exercises the public C interface from a C translation unit. */

#include <cm/cm.h>

#include <stdio.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                             \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: EXPECT(%s) failed (%s)\n", __FILE__, \
              __LINE__, #cond, cm_last_error());                 \
      ++failures;                                                \
    }                                                            \
  } while (0)

struct sender {
  cm_manager* m;
  int grants;
};

static void on_send(cm_flow flow, void* user) {
  struct sender* s = (struct sender*)user;
  ++s->grants;
  cm_notify(s->m, flow, 1500);
}

static double rate_seen = 0.0;
static void on_rate(cm_flow flow, double rate, double srtt, double loss,
                    void* user) {
  (void)flow;
  (void)srtt;
  (void)loss;
  (void)user;
  rate_seen = rate;
}

static double fixed_time(void* user) { return *(double*)user; }

int main(void) {
  double now = 0.0;
  cm_manager* m = NULL;
  cm_config cfg;
  cm_config_default(&cfg);
  EXPECT(cfg.default_mtu == 1500);
  EXPECT(cm_manager_create(&cfg, fixed_time, &now, &m) == CM_OK);

  cm_flowkey key = {1, 5000, 2, 80, CM_PROTO_TCP};
  cm_flow a = 0, b = 0, dup = 0;
  EXPECT(cm_open(m, &key, &a) == CM_OK);
  EXPECT(cm_open(m, &key, &dup) == CM_ERR_DUPLICATE_FLOW);
  EXPECT(strlen(cm_last_error()) > 0);
  key.src_port = 5001;
  EXPECT(cm_open(m, &key, &b) == CM_OK);

  uint64_t mtu = 0;
  EXPECT(cm_mtu(m, a, &mtu) == CM_OK && mtu == 1500);
  EXPECT(cm_request(m, a) == CM_ERR_NO_CALLBACK);

  struct sender s = {m, 0};
  EXPECT(cm_register_send(m, a, on_send, &s) == CM_OK);
  EXPECT(cm_request(m, a) == CM_OK);
  EXPECT(s.grants == 1);

  uint64_t cwnd = 0, ssthresh = 0, outstanding = 0;
  EXPECT(cm_window(m, a, &cwnd, &ssthresh, &outstanding) == CM_OK);
  EXPECT(cwnd == 1500 && outstanding == 1500);

  EXPECT(cm_register_update(m, b, on_rate, NULL) == CM_OK);
  EXPECT(cm_thresh(m, b, 2.0, 3.0) == CM_ERR_INVALID_THRESHOLD);
  EXPECT(cm_thresh(m, b, 0.5, 2.0) == CM_OK);

  cm_report bad = {100, 200, CM_NOLOSS, 0, 0.0};
  EXPECT(cm_update(m, a, &bad) == CM_ERR_INVALID_REPORT);
  now = 0.1;
  cm_report ok = {1500, 1500, CM_NOLOSS, 1, 0.1};
  EXPECT(cm_update(m, a, &ok) == CM_OK);
  EXPECT(cm_window(m, a, &cwnd, &ssthresh, &outstanding) == CM_OK);
  EXPECT(cwnd == 3000 && outstanding == 0);
  EXPECT(rate_seen > 0.0);

  cm_query_result q;
  EXPECT(cm_query(m, a, &q) == CM_OK);
  EXPECT(q.srtt > 0.09 && q.srtt < 0.11);

  cm_flow both[2] = {a, b};
  cm_query_result qs[2];
  EXPECT(cm_bulk_query(m, both, 2, qs) == CM_OK);
  EXPECT(cm_bulk_request(m, both, 0) == CM_OK);
  EXPECT(cm_scheduler_tick(m, 0.2) == CM_OK);

  cm_counters c;
  EXPECT(cm_get_counters(m, &c) == CM_OK);
  EXPECT(c.api_calls > 0 && c.send_callbacks == 1 && c.bulk_calls == 2);

  EXPECT(cm_close(m, b) == CM_OK);
  EXPECT(cm_query(m, 999, &q) == CM_ERR_UNKNOWN_FLOW);
  cm_manager_destroy(m);

  char* doc = NULL;
  EXPECT(cm_apply_override("{\"scenario\":\"udpcc_basic\"}", "duration=2",
                           &doc) == CM_OK);
  char* summary = NULL;
  EXPECT(cm_run_experiment(doc, NULL, 1, &summary) == CM_OK);
  EXPECT(summary && strstr(summary, "\"checks\"") != NULL);
  cm_free_string(summary);
  cm_free_string(doc);

  EXPECT(cm_run_experiment("{\"scenario\":1}", NULL, 0, NULL) == CM_ERR_CONFIG);
  EXPECT(strstr(cm_last_error(), "scenario") != NULL);
  EXPECT(cm_run_experiment("not json", NULL, 0, NULL) == CM_ERR_CONFIG);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  return failures ? 1 : 0;
}
