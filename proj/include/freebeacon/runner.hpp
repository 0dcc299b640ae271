#pragma once

// Turns a ScenarioConfig into simulations: world construction, Find
// parameter tuning, single runs and cartesian sweeps with summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "freebeacon/aggregation.hpp"
#include "freebeacon/baselines.hpp"
#include "freebeacon/config.hpp"
#include "freebeacon/energy.hpp"
#include "freebeacon/engine.hpp"

namespace freebeacon {

struct RunRow {
  ScenarioConfig config;
  std::uint64_t seed = 0;
  double find_p = 0.0;  ///< p actually used (Find only)
  RunMetrics metrics;
};

inline std::vector<DeviceSpec> make_devices(const ScenarioConfig& c) {
  const auto charging = parse_charging_spec(c.charging, c.slot_ms);
  std::vector<DeviceSpec> out;
  for (int i = 0; i < c.n_devices; ++i) out.push_back({i, std::nullopt, std::nullopt, charging, false});
  return out;
}

inline AggregationPlan make_plan(const ScenarioConfig& c, std::uint64_t seed) {
  switch (c.mode) {
    case Mode::Discover: return {};
    case Mode::Pairwise:
      return build_plan(Pattern::Pairs, c.n_devices, c.items_per_device, 1, c.op, seed, c.pairs);
    case Mode::Aggregate:
      return build_plan(c.pattern, c.n_devices, c.items_per_device, c.resolved_elements(), c.op, seed);
  }
  return {};
}

inline EngineConfig make_engine_config(const ScenarioConfig& c, std::uint64_t seed, double find_p) {
  EngineConfig e;
  e.cycle = CycleConfig{c.t_dist, c.t_b, c.n_devices, c.slot_ms};
  e.protocol = c.protocol;
  e.mode = c.mode;
  e.failure = {c.failure_rate, c.nvm};
  e.query_period = c.protocol == Protocol::FreeBeacon ? c.query_period : 0;
  e.coordinator_cycle = c.coordinator_cycle;
  e.find = {find_p, !c.find_p.has_value()};
  e.slot_limit = c.slot_limit;
  e.seed = seed;
  e.record_events = !c.event_log.empty();
  return e;
}

/// Mean two-device Find discovery time for one p. Trials that hit the cap
/// count as the cap.
inline double find_discovery_mean(const std::string& charging, double slot_ms, double p, int trials,
                                  std::uint64_t seed_base, Slot cap) {
  ScenarioConfig c;
  c.protocol = Protocol::Find;
  c.mode = Mode::Discover;
  c.n_devices = 2;
  c.charging = charging;
  c.slot_ms = slot_ms;
  c.slot_limit = cap;
  double sum = 0;
  for (int t = 0; t < trials; ++t) {
    const auto seed = seed_base + static_cast<std::uint64_t>(t);
    Simulation sim(make_engine_config(c, seed, p), make_devices(c));
    const auto& m = sim.run_until_complete();
    sum += static_cast<double>(m.completion_slot.value_or(cap));
  }
  return sum / trials;
}

struct FindTuning {
  double p = 0.5;
  std::vector<std::pair<double, double>> grid;  ///< (p, mean discovery slots)
};

/// Grid search over find_p_grid() on a fixed tuning seed set, cached per
/// (charging, slot_ms) so every run of a sweep uses the same p.
class FindTuner {
 public:
  explicit FindTuner(int trials = 24, Slot cap = 50'000'000, std::uint64_t seed_base = 0x7A5E0000)
      : trials_(trials), cap_(cap), seed_base_(seed_base) {}

  const FindTuning& tune(const std::string& charging, double slot_ms) {
    const auto key = charging + "@" + std::to_string(slot_ms);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    FindTuning t;
    double best = 0;
    for (double p : find_p_grid()) {
      const double mean = find_discovery_mean(charging, slot_ms, p, trials_, seed_base_, cap_);
      t.grid.emplace_back(p, mean);
      if (t.grid.size() == 1 || mean < best) {
        best = mean;
        t.p = p;
      }
    }
    return cache_.emplace(key, std::move(t)).first->second;
  }

  double p_for(const ScenarioConfig& c) {
    if (c.protocol != Protocol::Find) return c.find_p.value_or(0.5);
    if (c.find_p) return *c.find_p;
    return tune(c.charging, c.slot_ms).p;
  }

 private:
  int trials_;
  Slot cap_;
  std::uint64_t seed_base_;
  std::map<std::string, FindTuning> cache_;
};

/// Runs one (config, seed). Event records are appended to `events` when given.
inline RunRow run_one(const ScenarioConfig& c, std::uint64_t seed, FindTuner& tuner,
                      std::vector<EventRecord>* events = nullptr) {
  const double p = tuner.p_for(c);
  auto ecfg = make_engine_config(c, seed, p);
  ecfg.record_events = events != nullptr;
  Simulation sim(ecfg, make_devices(c), make_plan(c, seed));
  RunRow row{c, seed, p, sim.run_until_complete()};
  if (events) events->insert(events->end(), sim.events().begin(), sim.events().end());
  return row;
}

// Sweeps -------------------------------------------------------------------

inline constexpr std::int64_t kDefaultSweepBudget = 100'000;

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Keys that hold lists as ordinary values rather than sweep axes.
inline bool list_valued_key(const std::string& k) { return k == "pairs" || k == "seeds" || k == "seed"; }

/// "coprimes:LO:HI" -> every t_b in [LO, HI] co-prime to t_dist.
inline std::vector<std::int64_t> coprimes_in(std::int64_t t_dist, std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> out;
  for (auto v = std::max<std::int64_t>(lo, 2); v <= hi; ++v)
    if (is_coprime(v, t_dist)) out.push_back(v);
  return out;
}

/// Expands list-valued keys into the cartesian product of points. Axes go in
/// alphabetical key order, the last one varying fastest. A sweep-only "budget" key caps
/// points x seeds.
inline std::vector<ScenarioConfig> expand_sweep(nlohmann::json j, std::int64_t* budget_out = nullptr) {
  if (!j.is_object()) throw ConfigError("sweep config must be a JSON object");
  std::int64_t budget = kDefaultSweepBudget;
  if (j.contains("budget")) {
    budget = j["budget"].get<std::int64_t>();
    j.erase("budget");
  }
  if (budget_out) *budget_out = budget;

  std::vector<std::string> axes;
  for (const auto& [k, v] : j.items())
    if (v.is_array() && !list_valued_key(k)) axes.push_back(k);

  std::vector<nlohmann::json> partial{j};
  for (const auto& axis : axes) {
    std::vector<nlohmann::json> next;
    for (const auto& base : partial)
      for (const auto& v : j[axis]) {
        auto point = base;
        point[axis] = v;
        next.push_back(std::move(point));
      }
    partial = std::move(next);
  }
  std::vector<nlohmann::json> expanded;
  for (auto& point : partial) {
    if (point.contains("t_b") && point["t_b"].is_string() && point["t_b"].get<std::string>().rfind("coprimes:", 0) == 0) {
      const auto spec = point["t_b"].get<std::string>();
      const auto rest = std::string_view(spec).substr(9);
      const auto colon = rest.find(':');
      const auto lo = colon == std::string_view::npos ? std::nullopt : detail::parse_int(rest.substr(0, colon));
      const auto hi = colon == std::string_view::npos ? std::nullopt : detail::parse_int(rest.substr(colon + 1));
      if (!lo || !hi) throw ConfigError("t_b '" + spec + "' must look like coprimes:LO:HI");
      const auto t_dist = point.value("t_dist", kDefaultTDist);
      for (auto tb : coprimes_in(t_dist, *lo, *hi)) {
        auto p = point;
        p["t_b"] = tb;
        expanded.push_back(std::move(p));
      }
    } else {
      expanded.push_back(std::move(point));
    }
  }
  std::vector<ScenarioConfig> out;
  for (const auto& p : expanded) out.push_back(parse_config_json(p));
  std::int64_t runs = 0;
  for (const auto& c : out) runs += static_cast<std::int64_t>(c.seeds.size());
  if (runs > budget)
    throw BudgetError("sweep needs " + std::to_string(runs) + " runs, budget is " + std::to_string(budget));
  return out;
}

struct SummaryRow {
  ScenarioConfig config;
  double find_p = 0.0;
  int runs = 0;
  int completed = 0;
  std::optional<double> mean, median, p25, p75;  ///< completion slot over completed runs
  std::optional<double> mean_discovery;          ///< discovery_complete over runs that reached it
};

/// Linear-interpolation quantile of sorted data (q in [0, 1]).
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline SummaryRow summarize(const std::vector<RunRow>& rows) {
  SummaryRow s;
  if (rows.empty()) return s;
  s.config = rows.front().config;
  s.find_p = rows.front().find_p;
  s.runs = static_cast<int>(rows.size());
  std::vector<double> done, disc;
  for (const auto& r : rows) {
    if (r.metrics.completion_slot) done.push_back(static_cast<double>(*r.metrics.completion_slot));
    if (r.metrics.discovery_complete) disc.push_back(static_cast<double>(*r.metrics.discovery_complete));
  }
  s.completed = static_cast<int>(done.size());
  if (!done.empty()) {
    std::sort(done.begin(), done.end());
    double sum = 0;
    for (double d : done) sum += d;
    s.mean = sum / static_cast<double>(done.size());
    s.median = quantile_sorted(done, 0.5);
    s.p25 = quantile_sorted(done, 0.25);
    s.p75 = quantile_sorted(done, 0.75);
  }
  if (!disc.empty()) {
    double sum = 0;
    for (double d : disc) sum += d;
    s.mean_discovery = sum / static_cast<double>(disc.size());
  }
  return s;
}

struct SweepResult {
  std::vector<RunRow> rows;
  std::vector<SummaryRow> summary;
};

/// Runs every point for each of its seeds. Points run one after another so
/// rows come out in a fixed order.
inline SweepResult run_sweep(const std::vector<ScenarioConfig>& points, FindTuner& tuner) {
  SweepResult out;
  for (const auto& c : points) {
    std::vector<RunRow> point_rows;
    for (auto seed : c.seeds) point_rows.push_back(run_one(c, seed, tuner));
    out.summary.push_back(summarize(point_rows));
    out.rows.insert(out.rows.end(), point_rows.begin(), point_rows.end());
  }
  return out;
}

}  // namespace freebeacon
