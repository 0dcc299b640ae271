#pragma once

// Frames and the shared-channel collision rule.
//
// A slot holds two windows (data, then beacon query), each with a forward and
// a response sub-phase. Every sub-phase is arbitrated the same way: one
// transmission is heard by whoever is awake and listening, two or more are
// all lost.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "freebeacon/arith.hpp"

namespace freebeacon {

inline constexpr DeviceId kBeaconId = -1;
inline constexpr DeviceId kBroadcastId = -2;

enum class FrameKind : std::uint8_t { Request, Reply, Data, Ack, Correction, Query };
inline constexpr int kFrameKindCount = 6;

constexpr std::string_view frame_kind_name(FrameKind k) noexcept {
  switch (k) {
    case FrameKind::Request: return "REQ";
    case FrameKind::Reply: return "REPLY";
    case FrameKind::Data: return "DATA";
    case FrameKind::Ack: return "ACK";
    case FrameKind::Correction: return "CORR";
    case FrameKind::Query: return "QUERY";
  }
  return "?";
}

struct Payload {
  std::int64_t value = 0;
  std::vector<std::uint64_t> contributors;  // bitset over device ids
  bool operator==(const Payload&) const = default;
};

struct Frame {
  FrameKind kind = FrameKind::Request;
  DeviceId src = 0;
  DeviceId dst = kBeaconId;
  Slot slot = 0;
  Residue index = 0;         ///< Reply / Correction: announced beacon index
  Residue t_recv = 0;        ///< Data: residue the sender believes it is meeting in
  std::int64_t action = -1;  ///< Data / Ack: schedule action key
  Payload payload;           ///< Data only
};

enum class Outcome : std::uint8_t { Delivered, Collision, Unheard };

constexpr std::string_view outcome_name(Outcome o) noexcept {
  switch (o) {
    case Outcome::Delivered: return "delivered";
    case Outcome::Collision: return "collision";
    case Outcome::Unheard: return "unheard";
  }
  return "?";
}

inline std::string node_name(DeviceId id) {
  if (id == kBeaconId) return "B";
  if (id == kBroadcastId) return "*";
  return std::to_string(id);
}

/// Arbitrates one sub-phase. `listeners` are the nodes awake and not
/// transmitting in it. Returns one outcome per transmission, in order.
/// Broadcast frames count as delivered when anyone is listening.
inline std::vector<Outcome> radio_arbitrate(const std::vector<Frame>& tx, const std::vector<DeviceId>& listeners) {
  std::vector<Outcome> out(tx.size(), Outcome::Collision);
  if (tx.size() != 1) return out;
  const DeviceId dst = tx.front().dst;
  bool heard = false;
  for (DeviceId l : listeners)
    if (l == dst || (dst == kBroadcastId && l != tx.front().src)) heard = true;
  out.front() = heard ? Outcome::Delivered : Outcome::Unheard;
  return out;
}

}  // namespace freebeacon
