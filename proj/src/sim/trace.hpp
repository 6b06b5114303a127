#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sim {

/// value1/value2 meanings per kind:
///   Grant         mtu, macroflow id
///   Send          seq (frame id for audio), bytes
///   Deliver       seq, bytes
///   Drop          seq, bytes
///   Mark          seq, bytes
///   CwndChange    cwnd bytes, ssthresh bytes   (flow = macroflow id)
///   RateCallback  rate B/s, srtt s
///   LayerChange   new layer index, rate B/s that drove the choice
///   PolicerDrop   frame id, policer rate B/s
///   BufDrop       dropped frame id, oldest retained frame id
///   TransferDone  bytes, completion time s
enum class TraceKind : std::uint8_t {
  Grant,
  Send,
  Deliver,
  Drop,
  Mark,
  CwndChange,
  RateCallback,
  LayerChange,
  PolicerDrop,
  BufDrop,
  TransferDone,
};

std::string_view to_string(TraceKind kind);
std::optional<TraceKind> trace_kind_from_string(std::string_view name);

struct TraceRecord {
  double t = 0.0;
  std::uint64_t flow = 0;
  TraceKind kind = TraceKind::Send;
  double value1 = 0.0;
  double value2 = 0.0;
  bool operator==(const TraceRecord&) const = default;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void emit(const TraceRecord& record) = 0;
};

class VectorTrace final : public TraceSink {
 public:
  void emit(const TraceRecord& record) override { records_.push_back(record); }
  const std::vector<TraceRecord>& records() const { return records_; }

 private:
  std::vector<TraceRecord> records_;
};

/// Shortest round-trip decimal form; identical input gives identical text.
std::string format_number(double value);

inline constexpr std::string_view kTraceHeader = "t,flow,kind,value1,value2";

void write_csv(std::ostream& out, const std::vector<TraceRecord>& records);
/// Throws std::runtime_error on malformed input.
std::vector<TraceRecord> read_csv(std::istream& in);

}  // namespace sim
