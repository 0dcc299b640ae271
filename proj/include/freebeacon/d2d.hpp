#pragma once

// Slot-jump pairwise exchange. A synced sender shifts its wakes onto the
// receiver's residue, transmits every wake until acked, then rolls back.
// In tree mode the roles swap and the receiver does the jumping.

#include <cstdint>

#include "freebeacon/arith.hpp"
#include "freebeacon/beacon.hpp"
#include "freebeacon/radio.hpp"

namespace freebeacon {

constexpr Residue jump_distance(Residue t_snd, Residue t_recv, std::int64_t t_dist) noexcept {
  return mod_pos(t_recv - t_snd, t_dist);
}

constexpr Slot rollback_delay(Slot delay_used, std::int64_t t_dist) noexcept { return mod_pos(t_dist - delay_used, t_dist); }

/// Offset that re-anchors a sender on its own slot after the beacon announced
/// the true index of the slot it transmitted in.
constexpr Residue sender_correction(Residue t_snd, Residue t_b_announced, std::int64_t t_dist) noexcept {
  return mod_pos(t_snd - t_b_announced, t_dist);
}

enum class Jumper : std::uint8_t { Sender, Receiver };

/// Where a synced device believes it is on the distribution cycle, and the
/// delay that moves it to a target residue on its next wake.
struct SlotTracker {
  Residue believed = 0;

  [[nodiscard]] Slot delay_to(Residue target, Slot cycle_slots, std::int64_t t_dist) const noexcept {
    return post_sync_delay(cycle_slots, jump_distance(believed, target, t_dist), t_dist);
  }
};

struct SenderState {
  Residue own_slot = 0;
  Residue target_slot = 0;
  Residue own_offset = 0;  ///< last re-anchoring offset learned from the beacon
  bool jump_active = false;

  void begin_jump(Residue target) noexcept {
    target_slot = target;
    jump_active = target != own_slot;
  }

  /// Ends the jump; returns the rollback distance (0 if no jump was active).
  Residue finish(std::int64_t t_dist) noexcept {
    const Residue back = jump_active ? rollback_delay(jump_distance(own_slot, target_slot, t_dist), t_dist) : 0;
    jump_active = false;
    target_slot = own_slot;
    return back;
  }

  void apply_correction(Residue announced, std::int64_t t_dist) noexcept {
    own_offset = sender_correction(own_slot, announced, t_dist);
  }

  [[nodiscard]] Residue meet_slot() const noexcept { return jump_active ? target_slot : own_slot; }
};

inline constexpr int kDefaultQueryPeriod = 5;

struct ReceiverState {
  Residue own_slot = 0;
  int query_period = kDefaultQueryPeriod;
  int query_countdown = kDefaultQueryPeriod;

  void reset_countdown() noexcept { query_countdown = query_period; }
};

enum class ReceiverAction : std::uint8_t { Idle, Ack, BeaconQuery };

/// One receiver wake. `incoming` is the data frame heard this wake, if any;
/// frames addressed elsewhere are ignored.
inline ReceiverAction receiver_step(ReceiverState& st, const Frame* incoming, DeviceId self) noexcept {
  if (incoming != nullptr && incoming->kind == FrameKind::Data && incoming->dst == self) {
    st.reset_countdown();
    return ReceiverAction::Ack;
  }
  if (st.query_period <= 0) return ReceiverAction::Idle;
  if (--st.query_countdown > 0) return ReceiverAction::Idle;
  st.reset_countdown();
  return ReceiverAction::BeaconQuery;
}

}  // namespace freebeacon
