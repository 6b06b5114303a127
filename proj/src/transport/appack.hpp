#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace transport {

/// Inclusive range of acknowledged datagram sequence numbers.
struct SeqRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
  bool operator==(const SeqRange&) const = default;
};

/// Application-level acknowledgement for datagram flows. See docs/appack.md
/// for the wire layout.
struct AppAck {
  static constexpr std::uint8_t kVersion = 1;

  std::vector<SeqRange> ranges;     // sequences newly acknowledged, ascending
  std::uint64_t highest_seen = 0;   // largest sequence received so far
  double echo_sent_at = 0.0;        // sender timestamp of highest_seen
  double hold_time = 0.0;           // receiver delay before this ack left
  std::uint32_t ecn_marked = 0;     // CE-marked datagrams in this batch

  bool operator==(const AppAck&) const = default;
};

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode(const AppAck& ack);
/// Throws WireError on truncation, trailing bytes, an unknown version or
/// malformed ranges.
AppAck decode(std::span<const std::uint8_t> bytes);

/// Collapses a sorted list of sequence numbers into ranges.
std::vector<SeqRange> to_ranges(std::span<const std::uint64_t> sorted_seqs);

}  // namespace transport
