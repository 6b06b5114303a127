#include "harness/config.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <set>

namespace harness {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Scenario, std::string_view>, 8> kNames{{
    {Scenario::TcpCompare, "tcp_compare"},
    {Scenario::Sharing, "sharing"},
    {Scenario::LayeredAlf, "layered_alf"},
    {Scenario::LayeredRate, "layered_rate"},
    {Scenario::DelayedFeedback, "delayed_feedback"},
    {Scenario::FairnessEnsemble, "fairness_ensemble"},
    {Scenario::UdpccBasic, "udpcc_basic"},
    {Scenario::Vat, "vat"},
}};

std::string type_name(const json& j) { return j.type_name(); }

/// Reads the members of one JSON object into a struct, remembering which keys
/// were consumed so that leftovers can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(where() + ": expected an object, got " + type_name(j_));
  }

  template <class T>
  void field(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, child(key), out);
  }

  template <class T, class Fn>
  void object(const char* key, T& out, Fn&& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    ObjectReader sub(*it, child(key));
    fn(sub, out);
    sub.finish();
  }

  /// Marks a key as handled elsewhere.
  void skip(const char* key) { seen_.insert(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key()))
        throw ConfigError(child(it.key()) + ": unknown field");
  }

  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  static void read(const json& v, const std::string& path, double& out) {
    if (!v.is_number())
      throw ConfigError(path + ": expected a number, got " + type_name(v));
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean())
      throw ConfigError(path + ": expected true or false, got " + type_name(v));
    out = v.get<bool>();
  }
  template <class U>
    requires std::is_unsigned_v<U> && (!std::is_same_v<U, bool>)
  static void read(const json& v, const std::string& path, U& out) {
    if (!v.is_number_unsigned() &&
        !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(path + ": expected a non-negative integer, got " +
                        v.dump());
    const auto raw = v.get<std::uint64_t>();
    if (raw > std::numeric_limits<U>::max())
      throw ConfigError(path + ": value " + v.dump() + " is out of range");
    out = static_cast<U>(raw);
  }
  static void read(const json& v, const std::string& path,
                   std::vector<double>& out) {
    if (!v.is_array())
      throw ConfigError(path + ": expected an array, got " + type_name(v));
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      double x = 0.0;
      read(v[i], path + "[" + std::to_string(i) + "]", x);
      out.push_back(x);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_link(ObjectReader& r, LinkParams& l) {
  r.field("bandwidth_bps", l.bandwidth_bps);
  r.field("delay", l.delay);
  r.field("queue_limit", l.queue_limit);
  r.field("loss_prob", l.loss_prob);
  r.field("ecn", l.ecn);
  r.field("mtu", l.mtu);
}

json link_json(const LinkParams& l) {
  return {{"bandwidth_bps", l.bandwidth_bps}, {"delay", l.delay},
          {"queue_limit", l.queue_limit},     {"loss_prob", l.loss_prob},
          {"ecn", l.ecn},                     {"mtu", l.mtu}};
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

void validate_link(const LinkParams& l, const std::string& path) {
  require(l.bandwidth_bps > 0.0, path + ".bandwidth_bps", "must be positive");
  require(l.delay >= 0.0, path + ".delay", "must be non-negative");
  require(l.queue_limit >= 1, path + ".queue_limit", "must be at least 1");
  require(l.loss_prob >= 0.0 && l.loss_prob < 1.0, path + ".loss_prob",
          "must be in [0, 1)");
  require(l.mtu >= 64, path + ".mtu", "must be at least 64");
}

void validate(const ExperimentConfig& c) {
  require(c.duration > 0.0, "duration", "must be positive");
  validate_link(c.link, "link");
  validate_link(c.reverse_link, "reverse_link");
  for (std::size_t i = 0; i < c.bandwidth_schedule.size(); ++i) {
    const auto& s = c.bandwidth_schedule[i];
    const std::string p = "bandwidth_schedule[" + std::to_string(i) + "]";
    require(s.at >= 0.0, p + ".at", "must be non-negative");
    require(s.bandwidth_bps > 0.0, p + ".bandwidth_bps", "must be positive");
    if (i > 0)
      require(s.at >= c.bandwidth_schedule[i - 1].at, p + ".at",
              "steps must be in time order");
  }
  require(c.cm.initial_window_mtus >= 1, "cm.initial_window_mtus",
          "must be at least 1");
  require(c.cm.grant_lease > 0.0, "cm.grant_lease", "must be positive");
  require(c.cm.idle_rto_multiple > 0.0, "cm.idle_rto_multiple",
          "must be positive");
  require(c.cm.max_tick_period > 0.0, "cm.max_tick_period", "must be positive");
  try {
    apps::validate(c.layers.to_layers());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("layers: ") + e.what());
  }
  auto thresholds = [](double down, double up, const std::string& p) {
    require(down > 0.0 && down < 1.0, p + ".thresh_down", "must be in (0, 1)");
    require(up > 1.0, p + ".thresh_up", "must be greater than 1");
  };
  thresholds(c.rate_app.thresh_down, c.rate_app.thresh_up, "rate_app");
  thresholds(c.vat.thresh_down, c.vat.thresh_up, "vat");
  require(c.feedback.batch_packets >= 1, "feedback.batch_packets",
          "must be at least 1");
  require(c.feedback.batch_timeout >= 0.0, "feedback.batch_timeout",
          "must be non-negative");
  require(c.sharing.transfers >= 1, "sharing.transfers", "must be at least 1");
  require(c.sharing.transfer_bytes >= 1, "sharing.transfer_bytes",
          "must be at least 1");
  require(c.sharing.gap >= 0.0, "sharing.gap", "must be non-negative");
  require(c.ensemble.flows >= 1, "ensemble.flows", "must be at least 1");
  require(c.ensemble.warmup >= 0.0, "ensemble.warmup", "must be non-negative");
  if (c.scenario == Scenario::FairnessEnsemble)
    require(c.ensemble.warmup < c.duration, "ensemble.warmup",
            "must lie inside the run");
  require(c.udpcc.flows >= 1, "udpcc.flows", "must be at least 1");
  require(c.udpcc.queue_depth >= 1, "udpcc.queue_depth", "must be at least 1");
  require(c.vat.bitrate_bps > 0.0, "vat.bitrate_bps", "must be positive");
  require(c.vat.frame_interval > 0.0, "vat.frame_interval", "must be positive");
  require(c.vat.app_buf_limit >= 1, "vat.app_buf_limit", "must be at least 1");
  require(c.vat.policer_depth_frames >= 1.0, "vat.policer_depth_frames",
          "must be at least 1");
}

}  // namespace

std::string_view to_string(Scenario s) {
  for (const auto& [value, name] : kNames)
    if (value == s) return name;
  return "unknown";
}

Scenario scenario_from_string(std::string_view name) {
  for (const auto& [value, n] : kNames)
    if (n == name) return value;
  std::string known;
  for (const auto& [value, n] : kNames) {
    if (!known.empty()) known += ", ";
    known += n;
  }
  throw ConfigError("scenario: unknown scenario '" + std::string(name) +
                    "' (expected one of " + known + ")");
}

const std::vector<Scenario>& all_scenarios() {
  static const std::vector<Scenario> all = [] {
    std::vector<Scenario> v;
    for (const auto& [value, name] : kNames) v.push_back(value);
    return v;
  }();
  return all;
}

ExperimentConfig default_config(Scenario scenario) {
  ExperimentConfig c;
  c.scenario = scenario;
  c.reverse_link = LinkParams{.bandwidth_bps = 10e6,
                              .delay = 0.030,
                              .queue_limit = 1000,
                              .loss_prob = 0.0,
                              .ecn = false,
                              .mtu = 1500};

  constexpr double kLayerLink = 128000.0 * 8.0;
  switch (scenario) {
    case Scenario::TcpCompare:
      c.duration = 60.0;
      c.link.loss_prob = 0.01;
      c.link.queue_limit = 100;
      break;
    case Scenario::Sharing:
      c.duration = 30.0;
      c.link.delay = 0.035;
      c.link.queue_limit = 100;
      c.reverse_link.delay = 0.035;
      c.cm.linger_macroflows = true;
      break;
    case Scenario::LayeredAlf:
    case Scenario::LayeredRate:
      c.duration = 60.0;
      c.link.bandwidth_bps = kLayerLink;
      c.link.queue_limit = 8;
      c.bandwidth_schedule = {{20.0, 32000.0 * 8.0}, {40.0, kLayerLink}};
      break;
    case Scenario::DelayedFeedback:
      c.duration = 60.0;
      c.link.bandwidth_bps = kLayerLink;
      c.link.queue_limit = 8;
      c.feedback = {.batch_packets = 500, .batch_timeout = 2.0};
      break;
    case Scenario::FairnessEnsemble:
      c.duration = 60.0;
      c.link.queue_limit = 50;
      break;
    case Scenario::UdpccBasic:
      c.duration = 30.0;
      break;
    case Scenario::Vat:
      // A 32 kbit/s audio path: low-speed MTU and a policer that follows
      // every few percent of rate change.
      c.duration = 180.0;
      c.link.bandwidth_bps = c.vat.bitrate_bps / 2.0;
      c.link.queue_limit = 50;
      c.link.mtu = 296;
      c.reverse_link.mtu = 296;
      c.vat.thresh_down = 0.97;
      c.vat.thresh_up = 1.03;
      break;
  }
  return c;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object())
    throw ConfigError("<root>: expected an object, got " + type_name(j));
  auto it = j.find("scenario");
  if (it == j.end()) throw ConfigError("scenario: required field is missing");
  if (!it->is_string())
    throw ConfigError("scenario: expected a string, got " + type_name(*it));

  ExperimentConfig c = default_config(scenario_from_string(it->get<std::string>()));
  ObjectReader r(j, "");
  r.field("seed", c.seed);
  r.field("duration", c.duration);
  r.object("link", c.link, read_link);
  r.object("reverse_link", c.reverse_link, read_link);

  r.object("cm", c.cm, [](ObjectReader& s, CmParams& p) {
    s.field("initial_window_mtus", p.initial_window_mtus);
    s.field("initial_ssthresh", p.initial_ssthresh);
    s.field("grant_lease", p.grant_lease);
    s.field("idle_rto_multiple", p.idle_rto_multiple);
    s.field("linger_macroflows", p.linger_macroflows);
    s.field("max_tick_period", p.max_tick_period);
  });
  r.object("tcp", c.tcp, [](ObjectReader& s, TcpParams& p) {
    s.field("delayed_ack", p.delayed_ack);
    s.field("handshake", p.handshake);
  });
  r.object("layers", c.layers, [](ObjectReader& s, LayerParams& p) {
    s.field("rates", p.rates);
    s.field("safety", p.safety);
  });
  r.object("rate_app", c.rate_app, [](ObjectReader& s, RateAppParams& p) {
    s.field("thresh_down", p.thresh_down);
    s.field("thresh_up", p.thresh_up);
    s.field("queue_limit", p.queue_limit);
  });
  r.object("alf", c.alf, [](ObjectReader& s, AlfParams& p) {
    s.field("request_before_notify", p.request_before_notify);
  });
  r.object("feedback", c.feedback, [](ObjectReader& s, FeedbackParams& p) {
    s.field("batch_packets", p.batch_packets);
    s.field("batch_timeout", p.batch_timeout);
  });
  r.object("sharing", c.sharing, [](ObjectReader& s, SharingParams& p) {
    s.field("transfers", p.transfers);
    s.field("transfer_bytes", p.transfer_bytes);
    s.field("gap", p.gap);
  });
  r.object("ensemble", c.ensemble, [](ObjectReader& s, EnsembleParams& p) {
    s.field("flows", p.flows);
    s.field("bulk", p.bulk);
    s.field("warmup", p.warmup);
  });
  r.object("udpcc", c.udpcc, [](ObjectReader& s, UdpccParams& p) {
    s.field("flows", p.flows);
    s.field("queue_depth", p.queue_depth);
  });
  r.object("vat", c.vat, [](ObjectReader& s, VatParams& p) {
    s.field("bitrate_bps", p.bitrate_bps);
    s.field("frame_interval", p.frame_interval);
    s.field("app_buf_limit", p.app_buf_limit);
    s.field("policer_depth_frames", p.policer_depth_frames);
    s.field("thresh_down", p.thresh_down);
    s.field("thresh_up", p.thresh_up);
  });

  if (auto sched = j.find("bandwidth_schedule"); sched != j.end()) {
    if (!sched->is_array())
      throw ConfigError("bandwidth_schedule: expected an array, got " +
                        type_name(*sched));
    c.bandwidth_schedule.clear();
    for (std::size_t i = 0; i < sched->size(); ++i) {
      BandwidthStep step;
      ObjectReader s((*sched)[i], "bandwidth_schedule[" + std::to_string(i) + "]");
      s.field("at", step.at);
      s.field("bandwidth_bps", step.bandwidth_bps);
      s.finish();
      c.bandwidth_schedule.push_back(step);
    }
  }
  r.skip("scenario");
  r.skip("bandwidth_schedule");
  r.finish();

  validate(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json schedule = json::array();
  for (const auto& s : c.bandwidth_schedule)
    schedule.push_back({{"at", s.at}, {"bandwidth_bps", s.bandwidth_bps}});
  return {
      {"scenario", std::string(to_string(c.scenario))},
      {"seed", c.seed},
      {"duration", c.duration},
      {"link", link_json(c.link)},
      {"reverse_link", link_json(c.reverse_link)},
      {"bandwidth_schedule", schedule},
      {"cm",
       {{"initial_window_mtus", c.cm.initial_window_mtus},
        {"initial_ssthresh", c.cm.initial_ssthresh},
        {"grant_lease", c.cm.grant_lease},
        {"idle_rto_multiple", c.cm.idle_rto_multiple},
        {"linger_macroflows", c.cm.linger_macroflows},
        {"max_tick_period", c.cm.max_tick_period}}},
      {"tcp",
       {{"delayed_ack", c.tcp.delayed_ack}, {"handshake", c.tcp.handshake}}},
      {"layers", {{"rates", c.layers.rates}, {"safety", c.layers.safety}}},
      {"rate_app",
       {{"thresh_down", c.rate_app.thresh_down},
        {"thresh_up", c.rate_app.thresh_up},
        {"queue_limit", c.rate_app.queue_limit}}},
      {"alf", {{"request_before_notify", c.alf.request_before_notify}}},
      {"feedback",
       {{"batch_packets", c.feedback.batch_packets},
        {"batch_timeout", c.feedback.batch_timeout}}},
      {"sharing",
       {{"transfers", c.sharing.transfers},
        {"transfer_bytes", c.sharing.transfer_bytes},
        {"gap", c.sharing.gap}}},
      {"ensemble",
       {{"flows", c.ensemble.flows},
        {"bulk", c.ensemble.bulk},
        {"warmup", c.ensemble.warmup}}},
      {"udpcc",
       {{"flows", c.udpcc.flows}, {"queue_depth", c.udpcc.queue_depth}}},
      {"vat",
       {{"bitrate_bps", c.vat.bitrate_bps},
        {"frame_interval", c.vat.frame_interval},
        {"app_buf_limit", c.vat.app_buf_limit},
        {"policer_depth_frames", c.vat.policer_depth_frames},
        {"thresh_down", c.vat.thresh_down},
        {"thresh_up", c.vat.thresh_up}}},
  };
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("--set " + std::string(assignment) +
                      ": expected key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty())
      throw ConfigError("--set " + key + ": empty path component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace harness
