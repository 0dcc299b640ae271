#pragma once

// Beacon index broadcast and the device-side discovery arithmetic.
//
// The beacon wakes at absolute slots n * t_b (n >= 1) and answers a request
// with (n * t_b) mod t_dist, which is just the absolute slot mod t_dist.
// Unsynced devices pad each cycle to a multiple of t_dist so they keep one
// residue; the beacon's index walks all residues when gcd(t_b, t_dist) = 1.

#include <cstdint>

#include "freebeacon/arith.hpp"
#include "freebeacon/rng.hpp"

namespace freebeacon {

/// Index announced at the beacon's n-th wake.
constexpr Residue beacon_index(std::int64_t n, const CycleConfig& cfg) noexcept { return mod_pos(n * cfg.t_b, cfg.t_dist); }

/// Padding that rounds a natural cycle of cycle_slots up to a multiple of
/// t_dist. Already-aligned cycles get 0, not t_dist.
constexpr Slot alignment_delay(Slot cycle_slots, std::int64_t t_dist) noexcept { return mod_pos(-cycle_slots, t_dist); }

/// Extra whole-cycle delay once a device has failed more than t_dist attempts.
/// Always a multiple of t_dist, so the device's residue is preserved.
inline Slot backoff_delay(std::int64_t attempt_count, std::int64_t t_dist, RngStream& rng) {
  if (attempt_count <= t_dist) return 0;
  return rng.bernoulli(0.5) ? t_dist : 0;
}

/// Slots a device must add to move from the announced residue to its own.
constexpr Residue sync_offset(Residue own_slot, Residue announced, std::int64_t t_dist) noexcept {
  return mod_pos(own_slot - announced, t_dist);
}

/// Delay for the cycle after an offset is learned: align, then shift by offset.
constexpr Slot post_sync_delay(Slot cycle_slots, Residue offset, std::int64_t t_dist) noexcept {
  return mod_pos(t_dist - mod_pos(cycle_slots, t_dist) + offset, t_dist);
}

struct BeaconState {
  CycleConfig config;
  std::int64_t wake_count = 0;  ///< n of the most recent wake; 0 before the first

  [[nodiscard]] static constexpr bool awake_at(Slot s, std::int64_t t_b) noexcept { return s > 0 && s % t_b == 0; }
  [[nodiscard]] bool awake_at(Slot s) const noexcept { return awake_at(s, config.t_b); }

  /// Advances to the wake at slot s (must be a wake slot) and returns the index.
  Residue wake(Slot s) noexcept {
    wake_count = s / config.t_b;
    return beacon_index(wake_count, config);
  }
};

enum class SyncPhase { Unsynced, Synced };

struct DiscoveryState {
  Residue allocated_slot = 0;
  std::int64_t attempt_count = 0;
  SyncPhase phase = SyncPhase::Unsynced;
  Residue sync_offset = 0;  ///< meaningful only when Synced
  bool collided = false;    ///< a REQ of ours collided since the last reset; enables backoff

  [[nodiscard]] bool synced() const noexcept { return phase == SyncPhase::Synced; }

  void reset() noexcept {
    attempt_count = 0;
    phase = SyncPhase::Unsynced;
    sync_offset = 0;
    collided = false;
  }
};

}  // namespace freebeacon
