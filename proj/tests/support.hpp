#pragma once

// Scenario builders and small statistics shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "freebeacon/freebeacon.hpp"

namespace fbtest {

using namespace freebeacon;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string golden_path(const std::string& name) { return std::string(FREEBEACON_GOLDEN_DIR) + "/" + name; }

inline std::string event_log_text(const Simulation& sim) {
  std::ostringstream os;
  write_event_log(os, sim.events());
  return os.str();
}

/// t_dist 5, t_b 2; device 4 (slot 4) first wakes at slot 3 and charges 4
/// slots per cycle. Misses the beacon at 3, syncs at 8 with index 3.
inline EngineConfig discovery_example_config() {
  EngineConfig c;
  c.cycle = CycleConfig{5, 2, 1, 1.0};
  c.record_events = true;
  return c;
}
inline std::vector<DeviceSpec> discovery_example_devices() { return {DeviceSpec{4, 4, 3, StaticCharging{4}, false}}; }

/// Synced devices 2 and 4 on t_dist 5; 4 sends one item to 2 by jumping 3
/// slots forward and later rolling back 2.
inline EngineConfig pairwise_example_config() {
  EngineConfig c;
  c.cycle = CycleConfig{5, 2, 2, 1.0};
  c.mode = Mode::Pairwise;
  c.record_events = true;
  return c;
}
inline std::vector<DeviceSpec> pairwise_example_devices() {
  return {DeviceSpec{2, 2, 2, StaticCharging{4}, true}, DeviceSpec{4, 4, 4, StaticCharging{4}, true}};
}
inline AggregationPlan pairwise_example_plan() { return build_plan(Pattern::Pairs, 5, 1, 1, AggOp::Sum, 1, {{4, 2}}); }

/// Lone FreeBeacon device with a fixed charge. Returns the slot of its first
/// beacon contact, or nullopt if none happened by `horizon`.
inline std::optional<Slot> lone_contact(std::int64_t t_b, std::int64_t t_dist, Slot first_wake, Slot charge,
                                        Slot horizon) {
  EngineConfig c;
  c.cycle = CycleConfig{t_dist, t_b, 1, 1.0};
  c.slot_limit = horizon;
  Simulation sim(c, {DeviceSpec{0, 0, first_wake, StaticCharging{charge}, false}});
  return sim.run_until_complete().completion_slot;
}

/// Devices that all start synced on their own slot, first wake in the
/// second distribution cycle.
inline std::vector<DeviceSpec> presynced_devices(int n, std::int64_t t_dist, const std::vector<ChargingModel>& charging) {
  std::vector<DeviceSpec> out;
  for (int i = 0; i < n; ++i)
    out.push_back({i, i, t_dist + i, charging[static_cast<std::size_t>(i) % charging.size()], true});
  return out;
}

/// Sink-side oracle: for each aggregate key, the fold of every injected item,
/// computed straight from the plan without any engine state.
inline std::map<PartialKey, std::int64_t> oracle_aggregates(const AggregationPlan& plan) {
  std::map<PartialKey, std::int64_t> out;
  for (const auto& items : plan.items)
    for (const auto& [key, v] : items) {
      auto [it, fresh] = out.try_emplace(key, agg_identity(plan.op));
      it->second = agg_combine(plan.op, it->second, agg_lift(plan.op, v));
    }
  return out;
}

/// Device expected to hold each aggregate at the end.
inline DeviceId expected_sink(Pattern p, int n, const PartialKey& key, const AggregationPlan& plan) {
  switch (p) {
    case Pattern::Line:
    case Pattern::Tree: return n - 1;
    case Pattern::Ring: return static_cast<DeviceId>(mod_pos(key.second - 1, n));
    case Pattern::Pairs:
      for (int d = 0; d < n; ++d)
        for (const auto& a : plan.actions[static_cast<std::size_t>(d)])
          if (!a.send && a.partial == key) return d;
      return -1;
  }
  return -1;
}

/// Empty string if every aggregate sits unshipped at its sink with the
/// oracle value, otherwise a description of the first mismatch.
inline std::string compare_with_oracle(Pattern p, const Simulation& sim) {
  const auto& plan = sim.plan();
  for (const auto& [key, want] : oracle_aggregates(plan)) {
    const auto sink = expected_sink(p, plan.n_devices, key, plan);
    const auto& parts = sim.ledger(sink).partials;
    auto it = parts.find(key);
    const std::string name = "(" + std::to_string(key.first) + "," + std::to_string(key.second) + ")";
    if (it == parts.end()) return "sink " + std::to_string(sink) + " lacks " + name;
    if (it->second.shipped) return "sink " + std::to_string(sink) + " shipped " + name;
    if (it->second.value != want)
      return name + " = " + std::to_string(it->second.value) + ", oracle " + std::to_string(want);
    if (it->second.contributors.size() != static_cast<int>(plan.items.size()) && p != Pattern::Pairs)
      return name + " has " + std::to_string(it->second.contributors.size()) + " contributors";
  }
  return {};
}

/// Runs every exchange of the plan one at a time in key order, with no
/// radio at all. The reference result for the distributed executor.
inline std::vector<DataLedger> ledgers_after_serial_execution(const AggregationPlan& plan) {
  auto ledgers = initial_ledgers(plan);
  std::vector<std::pair<std::int64_t, std::pair<DeviceId, const Action*>>> sends;
  for (int d = 0; d < plan.n_devices; ++d)
    for (const auto& a : plan.actions[static_cast<std::size_t>(d)])
      if (a.send) sends.push_back({a.key, {d, &a}});
  std::stable_sort(sends.begin(), sends.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (const auto& [key, who] : sends) {
    const auto [from, a] = who;
    auto& src = ledgers[static_cast<std::size_t>(from)];
    merge_payload(ledgers[static_cast<std::size_t>(a->peer)], plan.op, a->partial, payload_of(src, a->partial));
    src.partials[a->partial].shipped = true;
  }
  for (int d = 0; d < plan.n_devices; ++d)
    ledgers[static_cast<std::size_t>(d)].cursor = plan.actions[static_cast<std::size_t>(d)].size();
  return ledgers;
}

/// Makespan in exchange steps when every exchange takes one step and each
/// device works through its own list in order.
inline int critical_path(const AggregationPlan& plan) {
  const auto n = static_cast<std::size_t>(plan.n_devices);
  std::vector<int> ready(n, 0);  // step at which each device finished its last action
  std::vector<std::size_t> pos(n, 0);
  int depth = 0;
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t d = 0; d < n; ++d) {
      if (pos[d] >= plan.actions[d].size()) continue;
      const auto& a = plan.actions[d][pos[d]];
      if (!a.send) continue;
      const auto r = static_cast<std::size_t>(a.peer);
      if (pos[r] >= plan.actions[r].size()) continue;
      const auto& b = plan.actions[r][pos[r]];
      if (b.send || b.key != a.key || b.peer != static_cast<DeviceId>(d)) continue;
      const int step = std::max(ready[d], ready[r]) + 1;
      ready[d] = ready[r] = step;
      depth = std::max(depth, step);
      ++pos[d];
      ++pos[r];
      progress = true;
    }
  }
  for (std::size_t d = 0; d < n; ++d)
    if (pos[d] != plan.actions[d].size()) return -1;  // deadlock
  return depth;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace fbtest
