#pragma once

// Slot-indexed simulation of one beacon (or coordinator) and a set of
// battery-free devices sharing one radio channel.
//
// Only slots in which some device wakes are processed; the beacon keeps no
// state besides its wake pattern, so idle beacon slots can be skipped.
//
// Slot layout, in order:
//   window 1 forward   discovery requests, data frames
//   window 1 response  beacon replies, acks, beacon corrections
//   window 2 forward   receiver beacon queries
//   window 2 response  beacon replies to queries
// After the windows every awake device plans its next wake, and failure dice
// are rolled for the cycle it just completed.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "freebeacon/aggregation.hpp"
#include "freebeacon/arith.hpp"
#include "freebeacon/baselines.hpp"
#include "freebeacon/beacon.hpp"
#include "freebeacon/d2d.hpp"
#include "freebeacon/energy.hpp"
#include "freebeacon/radio.hpp"
#include "freebeacon/rng.hpp"

namespace freebeacon {

enum class Protocol : std::uint8_t { FreeBeacon, Find, Probe };
enum class Mode : std::uint8_t { Discover, Pairwise, Aggregate };
enum class EndReason : std::uint8_t { Running, Completed, SlotLimit, TraceExhausted };

constexpr std::string_view protocol_name(Protocol p) noexcept {
  switch (p) {
    case Protocol::FreeBeacon: return "freebeacon";
    case Protocol::Find: return "find";
    case Protocol::Probe: return "probe";
  }
  return "?";
}

constexpr std::string_view mode_name(Mode m) noexcept {
  switch (m) {
    case Mode::Discover: return "discover";
    case Mode::Pairwise: return "pairwise";
    case Mode::Aggregate: return "aggregate";
  }
  return "?";
}

constexpr std::string_view end_reason_name(EndReason r) noexcept {
  switch (r) {
    case EndReason::Running: return "running";
    case EndReason::Completed: return "completed";
    case EndReason::SlotLimit: return "slot_limit";
    case EndReason::TraceExhausted: return "trace_exhausted";
  }
  return "?";
}

inline Protocol parse_protocol(std::string_view s) {
  if (s == "freebeacon") return Protocol::FreeBeacon;
  if (s == "find") return Protocol::Find;
  if (s == "probe" || s == "pulsar") return Protocol::Probe;
  if (s == "flync" || s == "flync-find")
    throw ConfigError("protocol '" + std::string(s) + "' needs a shared light signal and is not simulated");
  throw ConfigError("unknown protocol '" + std::string(s) + "' (expected freebeacon, find or probe)");
}

inline Mode parse_mode(std::string_view s) {
  if (s == "discover") return Mode::Discover;
  if (s == "pairwise") return Mode::Pairwise;
  if (s == "aggregate") return Mode::Aggregate;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected discover, pairwise or aggregate)");
}

struct FailureModel {
  double rate = 0.0;  ///< reset probability per completed charging cycle
  bool nvm = false;   ///< keep the slot role across resets
};

/// Rolls the failure die for one completed cycle.
inline bool inject_failure(RngStream& rng, const FailureModel& m) { return m.rate > 0.0 && rng.bernoulli(m.rate); }

/// An internal consistency check failed; the run cannot be trusted.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr Slot kDefaultSlotLimit = 300'000'000;

struct EngineConfig {
  CycleConfig cycle;
  Protocol protocol = Protocol::FreeBeacon;
  Mode mode = Mode::Discover;
  FailureModel failure;
  int query_period = kDefaultQueryPeriod;
  std::int64_t coordinator_cycle = kDefaultCoordinatorCycle;
  FindParams find;
  Slot slot_limit = kDefaultSlotLimit;
  std::uint64_t seed = 1;
  bool record_events = false;
};

struct DeviceSpec {
  DeviceId id = 0;
  std::optional<Residue> slot;      ///< allocated residue; defaults to id mod t_dist
  std::optional<Slot> first_wake;   ///< defaults to a random boot phase
  ChargingModel charging = StaticCharging{};
  bool presynced = false;
};

struct ScriptedFailure {
  DeviceId id = 0;
  Slot at = 0;  ///< the device resets at the end of its first cycle at or after this slot
};

struct FrameCounters {
  std::array<std::int64_t, kFrameKindCount> sent{};
  std::array<std::int64_t, kFrameKindCount> delivered{};
  std::array<std::int64_t, kFrameKindCount> collided{};
  std::array<std::int64_t, kFrameKindCount> unheard{};

  [[nodiscard]] static std::int64_t total(const std::array<std::int64_t, kFrameKindCount>& a) {
    std::int64_t t = 0;
    for (auto v : a) t += v;
    return t;
  }
};

struct RunMetrics {
  std::vector<std::optional<Slot>> discovery_slot;  ///< per device (in id order), first sync
  std::optional<Slot> discovery_complete;           ///< first slot with every device synced
  std::int64_t pairings_completed = 0;
  std::int64_t actions_total = 0;
  std::optional<Slot> completion_slot;  ///< empty means incomplete
  bool aggregate_ok = false;
  std::string aggregate_detail;
  std::int64_t collisions = 0;  ///< sub-phases with two or more transmissions
  std::int64_t shared_wake_slots = 0;
  std::int64_t wakes = 0;
  std::int64_t failures = 0;
  std::int64_t corrections = 0;
  std::int64_t query_resyncs = 0;
  std::int64_t duplicate_acks = 0;
  FrameCounters frames;
  EndReason end_reason = EndReason::Running;
  Slot end_slot = 0;
};

struct EventRecord {
  Slot slot = 0;
  FrameKind kind = FrameKind::Request;
  DeviceId src = 0;
  DeviceId dst = 0;
  Outcome outcome = Outcome::Unheard;
  bool operator==(const EventRecord&) const = default;
};

inline std::string format_event(const EventRecord& e) {
  return std::to_string(e.slot) + "," + std::string(frame_kind_name(e.kind)) + "," + node_name(e.src) + "," +
         node_name(e.dst) + "," + std::string(outcome_name(e.outcome));
}

inline void write_event_log(std::ostream& os, const std::vector<EventRecord>& events) {
  for (const auto& e : events) os << format_event(e) << '\n';
}

struct WakeInfo {
  Slot slot = 0;
  DeviceId id = 0;
  bool synced = false;
  Residue believed = 0;  ///< meaningful when synced
};

/// Stream ids: four per device so each random concern has its own sequence.
inline constexpr std::uint64_t device_stream(DeviceId id, int k) { return static_cast<std::uint64_t>(id) * 4 + k; }

class Simulation {
 public:
  using WakeObserver = std::function<void(const WakeInfo&)>;

  Simulation(EngineConfig cfg, std::vector<DeviceSpec> specs, AggregationPlan plan = {})
      : cfg_(std::move(cfg)), plan_(std::move(plan)) {
    std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    cfg_.cycle.n_devices = std::max<std::int64_t>(1, static_cast<std::int64_t>(specs.size()));
    if (cfg_.protocol != Protocol::Find)
      if (auto why = cfg_.cycle.violation(); !why.empty()) throw ConfigError(why);
    if (cfg_.protocol == Protocol::Probe && cfg_.coordinator_cycle < 1) throw ConfigError("coordinator cycle must be >= 1");
    if (cfg_.protocol == Protocol::Find && !cfg_.find.valid()) throw ConfigError("find p must be in (0, 1]");
    if (!(cfg_.failure.rate >= 0.0 && cfg_.failure.rate <= 1.0)) throw ConfigError("failure rate must be in [0, 1]");
    if (cfg_.mode != Mode::Discover && plan_.n_devices == 0 && !specs.empty())
      throw ConfigError("pairwise and aggregate modes need an aggregation plan");

    std::vector<bool> used_slot(static_cast<std::size_t>(cfg_.cycle.t_dist), false);
    for (auto& spec : specs) {
      if (spec.id < 0) throw ConfigError("device ids must be non-negative");
      if (!devices_.empty() && devices_.back().spec.id == spec.id)
        throw ConfigError("duplicate device id " + std::to_string(spec.id));
      if (auto why = validate_charging(spec.charging); !why.empty()) throw ConfigError(why);
      Device d;
      d.own = spec.slot.value_or(mod_pos(spec.id, cfg_.cycle.t_dist));
      if (d.own < 0 || d.own >= cfg_.cycle.t_dist)
        throw ConfigError("device " + std::to_string(spec.id) + " slot outside [0, t_dist)");
      if (cfg_.protocol != Protocol::Find) {
        if (used_slot[static_cast<std::size_t>(d.own)])
          throw ConfigError("slot " + std::to_string(d.own) + " allocated twice");
        used_slot[static_cast<std::size_t>(d.own)] = true;
      }
      d.charge_rng = RngStream(cfg_.seed, device_stream(spec.id, 0));
      d.proto_rng = RngStream(cfg_.seed, device_stream(spec.id, 1));
      d.fail_rng = RngStream(cfg_.seed, device_stream(spec.id, 2));
      if (spec.first_wake) {
        if (*spec.first_wake < 1) throw ConfigError("first wake must be a positive slot");
        d.next_wake = *spec.first_wake;
      } else {
        RngStream boot(cfg_.seed, device_stream(spec.id, 3));
        const auto span = std::max<Slot>(cfg_.cycle.t_dist, static_cast<Slot>(mean_charging_slots(spec.charging)) + 1);
        d.next_wake = boot.uniform_int(1, span);
      }
      if (cfg_.mode != Mode::Discover) {
        if (spec.id >= plan_.n_devices)
          throw ConfigError("device " + std::to_string(spec.id) + " is not covered by the aggregation plan");
        d.actions = &plan_.actions[static_cast<std::size_t>(spec.id)];
      }
      d.sender.own_slot = d.sender.target_slot = d.own;
      d.receiver = {d.own, cfg_.query_period, cfg_.query_period};
      d.disc.allocated_slot = d.own;
      d.spec = std::move(spec);
      devices_.push_back(std::move(d));
    }
    if (cfg_.mode != Mode::Discover) {
      auto ledgers = initial_ledgers(plan_);
      for (auto& d : devices_) d.ledger = std::move(ledgers[static_cast<std::size_t>(d.spec.id)]);
      for (std::size_t i = 0; i < plan_.actions.size(); ++i)
        if (!plan_.actions[i].empty() && index_of(static_cast<DeviceId>(i)) < 0)
          throw ConfigError("aggregation plan uses device " + std::to_string(i) + " which is not simulated");
    }
    for (auto& d : devices_) {
      if (d.spec.presynced && cfg_.protocol != Protocol::Find) {
        d.disc.phase = SyncPhase::Synced;
        d.ever_synced = true;
        d.tracker.believed = mod_pos(d.next_wake, cfg_.cycle.t_dist);
        d.discovered_at = 0;
      }
    }
    metrics_.discovery_slot.assign(devices_.size(), std::nullopt);
    for (std::size_t i = 0; i < devices_.size(); ++i) metrics_.discovery_slot[i] = devices_[i].discovered_at;
    for (const auto& d : devices_) metrics_.actions_total += d.actions ? static_cast<std::int64_t>(d.actions->size()) : 0;
    check_complete(0);
  }

  // Devices point into plan_, so a Simulation stays where it was built.
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void set_wake_observer(WakeObserver obs) { observer_ = std::move(obs); }
  void add_scripted_failure(ScriptedFailure f) { scripted_.push_back(f); }

  [[nodiscard]] const EngineConfig& config() const { return cfg_; }
  [[nodiscard]] const RunMetrics& metrics() const { return metrics_; }
  [[nodiscard]] const std::vector<EventRecord>& events() const { return events_; }
  [[nodiscard]] Slot now() const { return now_; }
  [[nodiscard]] bool finished() const { return metrics_.end_reason != EndReason::Running; }
  [[nodiscard]] std::size_t device_count() const { return devices_.size(); }

  [[nodiscard]] Slot next_wake(DeviceId id) const { return dev(id).next_wake; }
  [[nodiscard]] bool synced(DeviceId id) const { return is_synced(dev(id)); }
  [[nodiscard]] Residue believed_residue(DeviceId id) const { return dev(id).tracker.believed; }
  [[nodiscard]] Residue allocated_slot(DeviceId id) const { return dev(id).own; }
  [[nodiscard]] std::size_t action_cursor(DeviceId id) const { return dev(id).ledger.cursor; }
  [[nodiscard]] const DataLedger& ledger(DeviceId id) const { return dev(id).ledger; }
  [[nodiscard]] const AggregationPlan& plan() const { return plan_; }

  [[nodiscard]] std::vector<DataLedger> ledgers() const {
    std::vector<DataLedger> out(static_cast<std::size_t>(std::max(plan_.n_devices, 0)));
    for (const auto& d : devices_)
      if (d.spec.id < plan_.n_devices) out[static_cast<std::size_t>(d.spec.id)] = d.ledger;
    return out;
  }

  /// Slot of the next processed event, or nullopt when no device is left.
  [[nodiscard]] std::optional<Slot> next_event() const {
    if (devices_.empty()) return std::nullopt;
    Slot s = devices_.front().next_wake;
    for (const auto& d : devices_) s = std::min(s, d.next_wake);
    return s;
  }

  /// Processes the next event slot. Returns false if nothing was left to do.
  bool step() {
    if (finished_hard_) return false;
    const auto s = next_event();
    if (!s) {
      now_ += 1;
      return false;
    }
    step_slot(*s);
    return true;
  }

  /// Runs until the mode's goal is reached or the slot limit passes.
  const RunMetrics& run_until_complete() {
    while (metrics_.end_reason == EndReason::Running) {
      const auto s = next_event();
      if (!s || *s > cfg_.slot_limit) {
        end(EndReason::SlotLimit, cfg_.slot_limit);
        break;
      }
      step_slot(*s);
    }
    finalize();
    return metrics_;
  }

  /// Processes every event up to and including slot `last`, ignoring completion.
  void run_until(Slot last) {
    while (!finished_hard_) {
      const auto s = next_event();
      if (!s || *s > last) break;
      step_slot(*s);
    }
    now_ = std::max(now_, last);
  }

  void run_for(Slot slots) { run_until(now_ + slots); }

 private:
  struct Device {
    DeviceSpec spec;
    Residue own = 0;
    RngStream charge_rng, proto_rng, fail_rng;
    Slot next_wake = 0;
    // volatile
    DiscoveryState disc;
    SlotTracker tracker;
    SenderState sender;
    ReceiverState receiver;
    ProbeState probe;
    std::optional<Residue> probe_base;
    // kept across resets
    bool ever_synced = false;
    bool found = false;  // Find discovery: took part in a heard hello
    std::optional<Slot> discovered_at;
    DataLedger ledger;
    const std::vector<Action>* actions = nullptr;
    // per-slot scratch
    bool transmitting = false;
    const Frame* accepted = nullptr;
  };

  [[nodiscard]] int index_of(DeviceId id) const {
    auto it = std::lower_bound(devices_.begin(), devices_.end(), id,
                               [](const Device& d, DeviceId v) { return d.spec.id < v; });
    if (it == devices_.end() || it->spec.id != id) return -1;
    return static_cast<int>(it - devices_.begin());
  }
  Device& dev(DeviceId id) {
    const int i = index_of(id);
    if (i < 0) throw std::out_of_range("no device " + std::to_string(id));
    return devices_[static_cast<std::size_t>(i)];
  }
  const Device& dev(DeviceId id) const { return const_cast<Simulation*>(this)->dev(id); }

  [[nodiscard]] bool has_beacon() const { return cfg_.protocol != Protocol::Find; }
  [[nodiscard]] bool beacon_awake(Slot s) const {
    if (cfg_.protocol == Protocol::FreeBeacon) return BeaconState::awake_at(s, cfg_.cycle.t_b);
    if (cfg_.protocol == Protocol::Probe) return coordinator_awake(s, cfg_.coordinator_cycle);
    return false;
  }
  [[nodiscard]] Residue beacon_index_at(Slot s) const { return mod_pos(s, cfg_.cycle.t_dist); }

  [[nodiscard]] bool is_synced(const Device& d) const {
    if (cfg_.protocol == Protocol::Find) return cfg_.mode == Mode::Discover ? d.found : true;
    return d.disc.synced();
  }

  [[nodiscard]] const Action* current_action(const Device& d) const {
    if (d.actions == nullptr || d.ledger.cursor >= d.actions->size()) return nullptr;
    return &(*d.actions)[d.ledger.cursor];
  }

  [[nodiscard]] Residue target_residue(const Device& d) const {
    const Action* a = current_action(d);
    if (a == nullptr) return d.own;
    const bool jumps = (a->send && a->jumper == Jumper::Sender) || (!a->send && a->jumper == Jumper::Receiver);
    return jumps ? dev(a->peer).own : d.own;
  }

  void record(const Frame& f, Outcome o) {
    const auto k = static_cast<std::size_t>(f.kind);
    ++metrics_.frames.sent[k];
    switch (o) {
      case Outcome::Delivered: ++metrics_.frames.delivered[k]; break;
      case Outcome::Collision: ++metrics_.frames.collided[k]; break;
      case Outcome::Unheard: ++metrics_.frames.unheard[k]; break;
    }
    if (cfg_.record_events) events_.push_back({f.slot, f.kind, f.src, f.dst, o});
  }

  std::vector<Outcome> arbitrate(const std::vector<Frame>& tx, const std::vector<DeviceId>& listeners) {
    auto out = radio_arbitrate(tx, listeners);
    if (tx.size() > 1) ++metrics_.collisions;
    for (std::size_t i = 0; i < tx.size(); ++i) record(tx[i], out[i]);
    return out;
  }

  std::vector<DeviceId> listeners(const std::vector<int>& awake, bool with_beacon) const {
    std::vector<DeviceId> out;
    for (int i : awake) {
      const auto& d = devices_[static_cast<std::size_t>(i)];
      if (!d.transmitting) out.push_back(d.spec.id);
    }
    if (with_beacon) out.push_back(kBeaconId);
    return out;
  }

  std::optional<Frame> forward_intent(Device& d, Slot s) {
    Frame f;
    f.src = d.spec.id;
    f.slot = s;
    if (cfg_.protocol == Protocol::Find) {
      if (cfg_.mode == Mode::Discover) {
        if (!d.proto_rng.bernoulli(0.5)) return std::nullopt;
        f.kind = FrameKind::Request;
        f.dst = kBroadcastId;
        return f;
      }
    } else if (!d.disc.synced()) {
      f.kind = FrameKind::Request;
      f.dst = kBeaconId;
      return f;
    }
    const Action* a = current_action(d);
    if (a == nullptr || !a->send) return std::nullopt;
    if (cfg_.protocol != Protocol::Find && d.tracker.believed != target_residue(d)) return std::nullopt;
    f.kind = FrameKind::Data;
    f.dst = a->peer;
    f.t_recv = d.tracker.believed;
    f.action = a->key;
    f.payload = payload_of(d.ledger, a->partial);
    return f;
  }

  /// Receiver side of a heard data frame. Returns true if it should be acked.
  bool accept_data(Device& r, const Frame& f, Slot s) {
    if (const Action* a = current_action(r); a != nullptr && !a->send && a->key == f.action && a->peer == f.src) {
      merge_payload(r.ledger, plan_.op, a->partial, f.payload);
      ++r.ledger.cursor;
      ++metrics_.pairings_completed;
      r.sender.finish(cfg_.cycle.t_dist);
      (void)s;
      return true;
    }
    if (r.actions != nullptr) {
      const auto end = r.actions->begin() + static_cast<std::ptrdiff_t>(r.ledger.cursor);
      auto it = std::lower_bound(r.actions->begin(), end, f.action,
                                 [](const Action& x, std::int64_t k) { return x.key < k; });
      if (it != end && it->key == f.action && !it->send && it->peer == f.src) {
        ++metrics_.duplicate_acks;
        return true;
      }
    }
    return false;
  }

  void on_ack(Device& d, const Frame& f) {
    const Action* a = current_action(d);
    if (a == nullptr || !a->send || a->key != f.action || a->peer != f.src) return;
    if (auto it = d.ledger.partials.find(a->partial); it != d.ledger.partials.end()) it->second.shipped = true;
    ++d.ledger.cursor;
    d.sender.finish(cfg_.cycle.t_dist);
  }

  void on_reply(Device& d, Residue index, Slot s) {
    if (cfg_.protocol == Protocol::Find) return;
    if (!d.disc.synced()) {
      d.disc.phase = SyncPhase::Synced;
      d.disc.sync_offset = sync_offset(d.own, index, cfg_.cycle.t_dist);
      d.ever_synced = true;
      if (!d.discovered_at) d.discovered_at = s;
    } else {
      ++metrics_.query_resyncs;
    }
    d.tracker.believed = index;
  }

  void on_correction(Device& d, Residue index) {
    d.tracker.believed = index;
    d.sender.apply_correction(index, cfg_.cycle.t_dist);
    ++metrics_.corrections;
  }

  void reset_volatile(Device& d) {
    d.disc.reset();
    d.sender = SenderState{d.own, d.own, 0, false};
    d.receiver.reset_countdown();
    d.probe = {};
    d.probe_base.reset();
    d.tracker.believed = 0;
    // With NVM a FreeBeacon device keeps its role and assumes it woke in its
    // own slot; corrections and queries repair the guess.
    if (cfg_.failure.nvm && d.ever_synced && cfg_.protocol == Protocol::FreeBeacon) {
      d.disc.phase = SyncPhase::Synced;
      d.tracker.believed = d.own;
    }
  }

  bool scripted_failure_due(const Device& d, Slot s) {
    for (auto it = scripted_.begin(); it != scripted_.end(); ++it)
      if (it->id == d.spec.id && it->at <= s) {
        scripted_.erase(it);
        return true;
      }
    return false;
  }

  void plan_next(Device& d, Slot s) {
    const auto charge = next_charging_slots(d.spec.charging, d.charge_rng);
    if (!charge) {
      end(EndReason::TraceExhausted, s);
      finished_hard_ = true;
      return;
    }
    const Slot cycle = *charge + 1;  // charge, then one working slot
    const bool scripted = scripted_failure_due(d, s);
    if (inject_failure(d.fail_rng, cfg_.failure) || scripted) {
      ++metrics_.failures;
      reset_volatile(d);
      d.next_wake = s + cycle;
      return;
    }
    const std::int64_t t_dist = cfg_.cycle.t_dist;
    Slot delay = 0;
    if (cfg_.protocol == Protocol::Find) {
      delay = find_delay(cfg_.find, d.proto_rng);
    } else if (!d.disc.synced()) {
      if (cfg_.protocol == Protocol::FreeBeacon) {
        ++d.disc.attempt_count;
        delay = alignment_delay(cycle, t_dist);
        if (d.disc.collided) delay += backoff_delay(d.disc.attempt_count, t_dist, d.proto_rng);
      } else {
        const std::int64_t c = cfg_.coordinator_cycle;
        if (!d.probe_base) {
          d.probe_base = mod_pos(s, c);
          (void)probe_delay(d.probe, c);
        }
        const Slot k = probe_delay(d.probe, c);
        delay = mod_pos(*d.probe_base + k - (s + cycle), c);
      }
    } else {
      const Residue target = target_residue(d);
      delay = d.tracker.delay_to(target, cycle, t_dist);
      d.tracker.believed = target;
      if (const Action* a = current_action(d); a != nullptr && a->send) d.sender.begin_jump(target);
    }
    d.next_wake = s + cycle + delay;
    if (delay < 0 || d.next_wake <= s + 1)
      throw InvariantError("device " + std::to_string(d.spec.id) + " scheduled a wake at " +
                           std::to_string(d.next_wake) + " right after slot " + std::to_string(s));
  }

  void step_slot(Slot s) {
    now_ = s;
    const std::int64_t t_dist = cfg_.cycle.t_dist;
    const bool beacon = beacon_awake(s);
    const Residue index = beacon_index_at(s);

    awake_.clear();
    for (std::size_t i = 0; i < devices_.size(); ++i)
      if (devices_[i].next_wake == s) awake_.push_back(static_cast<int>(i));
    if (awake_.size() >= 2) ++metrics_.shared_wake_slots;
    metrics_.wakes += static_cast<std::int64_t>(awake_.size());
    for (int i : awake_) {
      auto& d = devices_[static_cast<std::size_t>(i)];
      d.transmitting = false;
      d.accepted = nullptr;
      if (observer_) observer_({s, d.spec.id, is_synced(d), d.tracker.believed});
    }

    // Window 1.
    std::vector<Frame> tx;
    for (int i : awake_) {
      auto& d = devices_[static_cast<std::size_t>(i)];
      if (auto f = forward_intent(d, s)) {
        d.transmitting = true;
        tx.push_back(std::move(*f));
      }
    }
    const auto out = arbitrate(tx, listeners(awake_, beacon && has_beacon()));
    for (int i : awake_) devices_[static_cast<std::size_t>(i)].transmitting = false;
    for (std::size_t i = 0; i < tx.size(); ++i)
      if (tx[i].kind == FrameKind::Request && tx[i].dst == kBeaconId && out[i] == Outcome::Collision)
        dev(tx[i].src).disc.collided = true;

    std::vector<Frame> resp;
    if (tx.size() == 1) {
      const Frame& f = tx.front();
      if (f.kind == FrameKind::Request && f.dst == kBeaconId && out.front() == Outcome::Delivered) {
        resp.push_back(beacon_frame(FrameKind::Reply, f.src, s, index));
      } else if (f.kind == FrameKind::Request && f.dst == kBroadcastId && out.front() == Outcome::Delivered) {
        for (int i : awake_) {
          auto& d = devices_[static_cast<std::size_t>(i)];
          d.found = true;
          if (!d.discovered_at) d.discovered_at = s;
        }
      } else if (f.kind == FrameKind::Data) {
        if (out.front() == Outcome::Delivered) {
          auto& r = dev(f.dst);
          if (accept_data(r, f, s)) {
            r.accepted = &f;
            Frame ack;
            ack.kind = FrameKind::Ack;
            ack.src = r.spec.id;
            ack.dst = f.src;
            ack.slot = s;
            ack.action = f.action;
            resp.push_back(ack);
          }
        }
        if (beacon && cfg_.protocol == Protocol::FreeBeacon && f.t_recv != index)
          resp.push_back(beacon_frame(FrameKind::Correction, f.src, s, index));
      }
    }
    if (!resp.empty()) {
      for (const auto& r : resp)
        if (r.src != kBeaconId) dev(r.src).transmitting = true;
      const auto rout = arbitrate(resp, listeners(awake_, false));
      for (int i : awake_) devices_[static_cast<std::size_t>(i)].transmitting = false;
      if (resp.size() == 1 && rout.front() == Outcome::Delivered) {
        const Frame& r = resp.front();
        auto& d = dev(r.dst);
        if (r.kind == FrameKind::Reply) on_reply(d, r.index, s);
        else if (r.kind == FrameKind::Ack) on_ack(d, r);
        else if (r.kind == FrameKind::Correction) on_correction(d, r.index);
      }
    }

    // Window 2: receivers that heard nothing may ask the beacon for the index.
    if (cfg_.protocol == Protocol::FreeBeacon) {
      std::vector<Frame> queries;
      for (int i : awake_) {
        auto& d = devices_[static_cast<std::size_t>(i)];
        const Action* a = current_action(d);
        const bool receiving = (a != nullptr && !a->send) || d.accepted != nullptr;
        if (!d.disc.synced() || !receiving) continue;
        if (receiver_step(d.receiver, d.accepted, d.spec.id) != ReceiverAction::BeaconQuery) continue;
        Frame q;
        q.kind = FrameKind::Query;
        q.src = d.spec.id;
        q.dst = kBeaconId;
        q.slot = s;
        d.transmitting = true;
        queries.push_back(q);
      }
      if (!queries.empty()) {
        const auto qout = arbitrate(queries, listeners(awake_, beacon));
        for (int i : awake_) devices_[static_cast<std::size_t>(i)].transmitting = false;
        if (queries.size() == 1 && qout.front() == Outcome::Delivered) {
          std::vector<Frame> reply{beacon_frame(FrameKind::Reply, queries.front().src, s, index)};
          const auto rout = arbitrate(reply, listeners(awake_, false));
          if (rout.front() == Outcome::Delivered) on_reply(dev(queries.front().src), index, s);
        }
      }
    }

    for (int i : awake_) {
      plan_next(devices_[static_cast<std::size_t>(i)], s);
      if (finished_hard_) return;
    }
    for (std::size_t i = 0; i < devices_.size(); ++i) metrics_.discovery_slot[i] = devices_[i].discovered_at;
    check_complete(s);
    (void)t_dist;
  }

  static Frame beacon_frame(FrameKind kind, DeviceId dst, Slot s, Residue index) {
    Frame f;
    f.kind = kind;
    f.src = kBeaconId;
    f.dst = dst;
    f.slot = s;
    f.index = index;
    return f;
  }

  void check_complete(Slot s) {
    if (!metrics_.discovery_complete) {
      bool all = !devices_.empty();
      for (const auto& d : devices_) all = all && is_synced(d);
      if (all) metrics_.discovery_complete = s;
    }
    if (metrics_.end_reason != EndReason::Running) return;
    if (cfg_.mode == Mode::Discover) {
      if (metrics_.discovery_complete) {
        metrics_.completion_slot = metrics_.discovery_complete;
        end(EndReason::Completed, s);
      }
      return;
    }
    for (const auto& d : devices_)
      if (d.actions != nullptr && d.ledger.cursor < d.actions->size()) return;
    metrics_.completion_slot = s;
    end(EndReason::Completed, s);
  }

  void end(EndReason r, Slot s) {
    if (metrics_.end_reason != EndReason::Running) return;
    metrics_.end_reason = r;
    metrics_.end_slot = s;
  }

  void finalize() {
    if (cfg_.mode == Mode::Discover) {
      metrics_.aggregate_ok = metrics_.completion_slot.has_value();
      return;
    }
    const auto check = check_aggregates(plan_, ledgers());
    metrics_.aggregate_ok = metrics_.completion_slot.has_value() && check.ok;
    metrics_.aggregate_detail = metrics_.completion_slot ? check.detail : "incomplete";
  }

  EngineConfig cfg_;
  AggregationPlan plan_;
  std::vector<Device> devices_;
  std::vector<ScriptedFailure> scripted_;
  std::vector<EventRecord> events_;
  std::vector<int> awake_;
  WakeObserver observer_;
  RunMetrics metrics_;
  Slot now_ = 0;
  bool finished_hard_ = false;
};

}  // namespace freebeacon
