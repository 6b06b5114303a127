#pragma once

#include <cstdint>
#include <memory>

namespace transport {
struct AppAck;
}

namespace sim {

enum class PacketKind : std::uint8_t { Data, Ack, AppAck };

struct PayloadMeta {
  int layer = -1;
  std::uint64_t frame = 0;
};

struct Packet {
  std::uint64_t flow = 0;  // trace-level flow id
  std::uint64_t seq = 0;   // byte offset (TCP) or packet number (datagrams)
  std::uint32_t len = 0;   // bytes on the wire
  PacketKind kind = PacketKind::Data;
  bool ecn_marked = false;
  double sent_at = 0.0;
  PayloadMeta meta;

  // Transport header fields.
  std::uint64_t ack = 0;
  bool syn = false;
  bool ece = false;
  std::shared_ptr<const transport::AppAck> appack;
};

}  // namespace sim
