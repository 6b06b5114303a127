#include "transport/appack.hpp"

#include <bit>
#include <limits>
#include <string>

namespace transport {

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return take(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::uint64_t take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw WireError("appack: truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const AppAck& ack) {
  if (ack.ranges.size() > std::numeric_limits<std::uint16_t>::max())
    throw WireError("appack: too many ranges");
  std::vector<std::uint8_t> out;
  out.reserve(1 + 2 + ack.ranges.size() * 16 + 8 + 8 + 8 + 4);
  out.push_back(AppAck::kVersion);
  const auto n = static_cast<std::uint16_t>(ack.ranges.size());
  out.push_back(static_cast<std::uint8_t>(n));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  for (const SeqRange& r : ack.ranges) {
    put_u64(out, r.first);
    put_u64(out, r.last);
  }
  put_u64(out, ack.highest_seen);
  put_u64(out, std::bit_cast<std::uint64_t>(ack.echo_sent_at));
  put_u64(out, std::bit_cast<std::uint64_t>(ack.hold_time));
  put_u32(out, ack.ecn_marked);
  return out;
}

AppAck decode(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const std::uint8_t version = in.u8();
  if (version != AppAck::kVersion)
    throw WireError("appack: unsupported version " + std::to_string(version));
  AppAck ack;
  const std::uint16_t n = in.u16();
  ack.ranges.reserve(n);
  std::uint64_t prev_last = 0;
  for (std::uint16_t i = 0; i < n; ++i) {
    SeqRange r{in.u64(), in.u64()};
    if (r.first > r.last) throw WireError("appack: inverted range");
    if (i > 0 && r.first <= prev_last)
      throw WireError("appack: ranges not ascending");
    prev_last = r.last;
    ack.ranges.push_back(r);
  }
  ack.highest_seen = in.u64();
  ack.echo_sent_at = in.f64();
  ack.hold_time = in.f64();
  ack.ecn_marked = in.u32();
  if (!in.done()) throw WireError("appack: trailing bytes");
  return ack;
}

std::vector<SeqRange> to_ranges(std::span<const std::uint64_t> sorted_seqs) {
  std::vector<SeqRange> ranges;
  for (std::uint64_t seq : sorted_seqs) {
    if (!ranges.empty() && ranges.back().last + 1 == seq) {
      ranges.back().last = seq;
    } else if (ranges.empty() || seq > ranges.back().last) {
      ranges.push_back(SeqRange{seq, seq});
    }
  }
  return ranges;
}

}  // namespace transport
