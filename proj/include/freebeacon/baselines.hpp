#pragma once

// Comparison protocols. Find-style devices stretch each charging cycle by a
// geometric random delay and meet by chance; Pulsar-style devices probe a
// coordinator by extending each cycle one slot further than the last.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "freebeacon/arith.hpp"
#include "freebeacon/energy.hpp"
#include "freebeacon/radio.hpp"
#include "freebeacon/rng.hpp"

namespace freebeacon {

struct FindParams {
  double p = 0.5;  ///< success probability of the geometric delay
  bool tuned = false;

  [[nodiscard]] bool valid() const noexcept { return p > 0.0 && p <= 1.0; }
};

inline Slot find_delay(const FindParams& params, RngStream& rng) { return rng.geometric(params.p); }

/// Grid searched when tuning p: 2^-1 .. 2^-12.
inline std::vector<double> find_p_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 12; ++k) g.push_back(1.0 / static_cast<double>(std::int64_t{1} << k));
  return g;
}

inline constexpr std::int64_t kDefaultCoordinatorCycle = 31;

struct ProbeState {
  std::int64_t probe_count = 0;
};

inline Slot probe_delay(ProbeState& st, std::int64_t coordinator_cycle) noexcept {
  const Slot d = mod_pos(st.probe_count, coordinator_cycle);
  ++st.probe_count;
  return d;
}

/// Coordinator is awake at every positive multiple of its cycle.
constexpr bool coordinator_awake(Slot s, std::int64_t cycle) noexcept { return s > 0 && s % cycle == 0; }

enum class FindPairing : std::uint8_t { Random, Scheduled };

struct PairingRun {
  std::int64_t successes = 0;
  std::int64_t collisions = 0;
};

/// Find-style pairing without any slot structure. Every awake device flips a
/// coin to transmit or listen. Random pairing counts any frame heard by
/// someone. Scheduled pairing walks a fixed pair list (0,1), (1,2), ...,
/// (n-1,0) and only counts a frame from the current sender heard by the
/// current receiver; everyone else's transmissions are interference.
inline PairingRun find_pairing_count(int n, FindPairing mode, const ChargingModel& charging, const FindParams& params,
                                     Slot budget, std::uint64_t seed) {
  if (n < 2) throw ConfigError("pairing needs at least 2 devices");
  struct Dev {
    ChargingModel charging;
    RngStream rng;
    Slot next = 0;
  };
  std::vector<Dev> devs;
  for (int i = 0; i < n; ++i) {
    Dev d{charging, RngStream(seed, static_cast<std::uint64_t>(i) * 4 + 1), 0};
    RngStream boot(seed, static_cast<std::uint64_t>(i) * 4 + 3);
    d.next = boot.uniform_int(1, static_cast<Slot>(mean_charging_slots(charging)) + 1);
    devs.push_back(std::move(d));
  }
  PairingRun out;
  int current = 0;  // scheduled mode: pair (current, current + 1 mod n)
  std::vector<Frame> tx;
  std::vector<DeviceId> listeners;
  while (true) {
    Slot s = budget + 1;
    for (const auto& d : devs) s = std::min(s, d.next);
    if (s > budget) break;
    tx.clear();
    listeners.clear();
    for (int i = 0; i < n; ++i) {
      auto& d = devs[static_cast<std::size_t>(i)];
      if (d.next != s) continue;
      if (d.rng.bernoulli(0.5)) {
        Frame f;
        f.kind = FrameKind::Data;
        f.src = i;
        f.dst = kBroadcastId;
        f.slot = s;
        tx.push_back(f);
      } else {
        listeners.push_back(i);
      }
    }
    const auto outcome = radio_arbitrate(tx, listeners);
    if (tx.size() > 1) ++out.collisions;
    if (tx.size() == 1 && outcome.front() == Outcome::Delivered) {
      if (mode == FindPairing::Random) {
        ++out.successes;
      } else {
        const int want_src = current;
        const int want_dst = (current + 1) % n;
        const bool heard = std::find(listeners.begin(), listeners.end(), want_dst) != listeners.end();
        if (tx.front().src == want_src && heard) {
          ++out.successes;
          current = want_dst;
        }
      }
    }
    for (auto& d : devs) {
      if (d.next != s) continue;
      const auto charge = next_charging_slots(d.charging, d.rng);
      if (!charge) return out;
      d.next = s + *charge + 1 + find_delay(params, d.rng);
    }
  }
  return out;
}

}  // namespace freebeacon
