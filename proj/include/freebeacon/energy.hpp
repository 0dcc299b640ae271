#pragma once

// Charging-time sources: fixed, uniformly random per cycle, or replayed from a
// recorded trace. Durations are in slots and never below 1.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "freebeacon/arith.hpp"
#include "freebeacon/rng.hpp"

namespace freebeacon {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StaticCharging {
  Slot duration = 100;
  bool operator==(const StaticCharging&) const = default;
};

struct UniformCharging {
  Slot lo = 1;
  Slot hi = 500;
  bool operator==(const UniformCharging&) const = default;
};

struct TraceCharging {
  std::vector<Slot> durations;
  std::size_t cursor = 0;
  bool wrap = true;
  std::string source;  // informational, used when rendering the spec string
  bool operator==(const TraceCharging&) const = default;
};

using ChargingModel = std::variant<StaticCharging, UniformCharging, TraceCharging>;

enum class TraceUnit { Seconds, Slots };

inline std::string validate_charging(const ChargingModel& model) {
  struct V {
    std::string operator()(const StaticCharging& s) const {
      return s.duration >= 1 ? "" : "static charging duration must be >= 1 slot";
    }
    std::string operator()(const UniformCharging& u) const {
      return (u.lo >= 1 && u.lo <= u.hi) ? "" : "uniform charging needs 1 <= lo <= hi";
    }
    std::string operator()(const TraceCharging& t) const {
      if (t.durations.empty()) return "trace charging needs at least one entry";
      for (Slot d : t.durations)
        if (d < 1) return "trace entries must be >= 1 slot";
      return "";
    }
  };
  return std::visit(V{}, model);
}

/// Next charging duration in slots. std::nullopt means a non-wrapping trace
/// ran out, which ends the run.
inline std::optional<Slot> next_charging_slots(ChargingModel& model, RngStream& rng) {
  if (auto* s = std::get_if<StaticCharging>(&model)) return s->duration;
  if (auto* u = std::get_if<UniformCharging>(&model)) return rng.uniform_int(u->lo, u->hi);
  auto& t = std::get<TraceCharging>(model);
  if (t.cursor >= t.durations.size()) {
    if (!t.wrap || t.durations.empty()) return std::nullopt;
    t.cursor = 0;
  }
  return t.durations[t.cursor++];
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ceil() that forgives decimal round-off such as 0.3 * 1000 / 100 = 3.0000000000000004.
inline Slot ceil_slots(double x) { return static_cast<Slot>(std::ceil(x - 1e-9)); }

}  // namespace detail

/// Converts one trace value to slots: seconds are scaled by slot_ms, slot
/// counts are rounded up, and everything is floored at one slot.
inline Slot trace_value_to_slots(double value, double slot_ms, TraceUnit unit) {
  const double slots = unit == TraceUnit::Seconds ? value * 1000.0 / slot_ms : value;
  return std::max<Slot>(1, detail::ceil_slots(slots));
}

/// Parses trace text: one duration per line, '#' comment lines and blank lines skipped.
inline TraceCharging parse_trace(std::istream& in, double slot_ms, TraceUnit unit, const std::string& source = {}) {
  if (!(slot_ms > 0.0)) throw TraceError("slot_ms must be positive");
  TraceCharging trace;
  trace.source = source;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto value = detail::parse_double(text);
    if (!value) throw TraceError(source + ":" + std::to_string(line_no) + ": not a number: '" + std::string(text) + "'");
    if (*value < 0) throw TraceError(source + ":" + std::to_string(line_no) + ": negative duration");
    trace.durations.push_back(trace_value_to_slots(*value, slot_ms, unit));
  }
  if (trace.durations.empty()) throw TraceError(source + ": trace contains no durations");
  return trace;
}

inline TraceCharging load_trace(const std::string& path, double slot_ms, TraceUnit unit) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot read trace file '" + path + "'");
  return parse_trace(in, slot_ms, unit, path);
}

// Charging spec strings: "static:100", "uniform:1:500", "trace:PATH:seconds",
// "trace:PATH:slots" with an optional ":once" suffix to disable wrapping.

inline ChargingModel parse_charging_spec(const std::string& spec, double slot_ms) {
  std::vector<std::string> parts;
  {
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
  }
  auto bad = [&](const std::string& why) { return ConfigError("charging spec '" + spec + "': " + why); };
  if (parts.empty()) throw bad("empty");
  const auto& kind = parts[0];
  ChargingModel model;
  if (kind == "static") {
    if (parts.size() != 2) throw bad("expected static:SLOTS");
    auto d = detail::parse_int(parts[1]);
    if (!d) throw bad("duration is not an integer");
    model = StaticCharging{*d};
  } else if (kind == "uniform") {
    if (parts.size() != 3) throw bad("expected uniform:LO:HI");
    auto lo = detail::parse_int(parts[1]);
    auto hi = detail::parse_int(parts[2]);
    if (!lo || !hi) throw bad("bounds are not integers");
    model = UniformCharging{*lo, *hi};
  } else if (kind == "trace") {
    if (parts.size() < 3) throw bad("expected trace:PATH:seconds|slots[:once]");
    bool wrap = true;
    std::size_t unit_idx = parts.size() - 1;
    if (parts.back() == "once") {
      wrap = false;
      --unit_idx;
    }
    if (unit_idx < 2) throw bad("missing path or unit");
    TraceUnit unit;
    if (parts[unit_idx] == "seconds") unit = TraceUnit::Seconds;
    else if (parts[unit_idx] == "slots") unit = TraceUnit::Slots;
    else throw bad("unit must be 'seconds' or 'slots'");
    std::string path = parts[1];
    for (std::size_t i = 2; i < unit_idx; ++i) path += ":" + parts[i];
    TraceCharging t;
    try {
      t = load_trace(path, slot_ms, unit);
    } catch (const TraceError& e) {
      throw bad(e.what());
    }
    t.wrap = wrap;
    model = std::move(t);
  } else {
    throw bad("unknown kind '" + kind + "'");
  }
  if (auto why = validate_charging(model); !why.empty()) throw bad(why);
  return model;
}

/// Mean charging duration in slots, used for reporting and tuning heuristics.
inline double mean_charging_slots(const ChargingModel& model) {
  if (auto* s = std::get_if<StaticCharging>(&model)) return static_cast<double>(s->duration);
  if (auto* u = std::get_if<UniformCharging>(&model)) return 0.5 * static_cast<double>(u->lo + u->hi);
  const auto& t = std::get<TraceCharging>(model);
  double sum = 0;
  for (Slot d : t.durations) sum += static_cast<double>(d);
  return t.durations.empty() ? 0.0 : sum / static_cast<double>(t.durations.size());
}

}  // namespace freebeacon
