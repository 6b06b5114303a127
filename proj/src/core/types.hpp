#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace cm {

using Bytes = std::uint64_t;
using Seconds = double;
using HostId = std::uint32_t;

/// Opaque handle returned by open(); never reused within one manager.
struct FlowId {
  std::uint64_t value = 0;
  auto operator<=>(const FlowId&) const = default;
};

struct MacroflowId {
  std::uint64_t value = 0;
  auto operator<=>(const MacroflowId&) const = default;
};

enum class Protocol : std::uint8_t { Tcp, Udp };

struct FlowKey {
  HostId src_addr = 0;
  std::uint16_t src_port = 0;
  HostId dst_addr = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::Tcp;
  auto operator<=>(const FlowKey&) const = default;
};

enum class FlowMode : std::uint8_t { Buffered, RequestCallback, RateCallback };

enum class LossMode : std::uint8_t { NoLoss, Transient, Persistent, Ecn };

enum class Phase : std::uint8_t { SlowStart, CongestionAvoidance };

struct FeedbackReport {
  Bytes nsent = 0;
  Bytes nrecd = 0;
  LossMode lossmode = LossMode::NoLoss;
  std::optional<Seconds> rtt;
};

struct QueryResult {
  double rate = 0.0;  // bytes/second available to the flow
  Seconds srtt = 0.0;
  Seconds rttvar = 0.0;
  double loss_rate = 0.0;
};

enum class Errc {
  DuplicateFlow,
  UnknownFlow,
  NoCallbackRegistered,
  InvalidThreshold,
  InvalidReport,
  InvalidArgument,
};

const char* to_string(Errc code);
const char* to_string(LossMode mode);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

using SendCallback = std::function<void(FlowId)>;
using UpdateCallback =
    std::function<void(FlowId, double rate, Seconds srtt, double loss_rate)>;

}  // namespace cm
