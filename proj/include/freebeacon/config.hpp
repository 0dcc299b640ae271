#pragma once

// Scenario configuration: JSON documents, CLI overrides (applied as a JSON
// patch on top of the file), validation and canonical rendering.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "freebeacon/aggregation.hpp"
#include "freebeacon/arith.hpp"
#include "freebeacon/energy.hpp"
#include "freebeacon/engine.hpp"
#include "freebeacon/schedule.hpp"

namespace freebeacon {

enum class OutputFormat : std::uint8_t { Csv, JsonLines };

inline OutputFormat parse_format(std::string_view s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "jsonl" || s == "json-lines" || s == "json") return OutputFormat::JsonLines;
  throw ConfigError("unknown format '" + std::string(s) + "' (expected csv or jsonl)");
}

constexpr std::string_view format_name(OutputFormat f) noexcept { return f == OutputFormat::Csv ? "csv" : "jsonl"; }

inline constexpr std::int64_t kDefaultTDist = 51;

struct ScenarioConfig {
  Protocol protocol = Protocol::FreeBeacon;
  Mode mode = Mode::Discover;
  Pattern pattern = Pattern::Line;
  int n_devices = 2;
  std::int64_t t_dist = kDefaultTDist;
  std::int64_t t_b = 2;  ///< resolved; "auto" becomes smallest_coprime_ge2(t_dist)
  std::string charging = "uniform:1:500";
  double slot_ms = 1.0;
  double failure_rate = 0.0;
  bool nvm = false;
  int items_per_device = 1;
  int n_elements = 0;  ///< ring only; 0 means n_devices
  std::vector<std::pair<DeviceId, DeviceId>> pairs;  ///< pairwise; empty means (0,1), (2,3), ...
  AggOp op = AggOp::Sum;
  std::vector<std::uint64_t> seeds{1};
  Slot slot_limit = kDefaultSlotLimit;
  std::optional<double> find_p;  ///< empty means tuned on the charging workload
  int query_period = kDefaultQueryPeriod;
  std::int64_t coordinator_cycle = kDefaultCoordinatorCycle;
  std::string output;     ///< empty means stdout
  std::string event_log;  ///< empty means no event log
  OutputFormat format = OutputFormat::Csv;

  [[nodiscard]] int resolved_elements() const { return n_elements == 0 ? n_devices : n_elements; }

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "protocol", "mode",       "pattern",     "n_devices", "t_dist",       "t_b",         "charging",
      "slot_ms",  "failure_rate", "nvm",       "items_per_device", "n_elements", "pairs",   "op",
      "seed",     "seeds",      "slot_limit",  "find_p",    "query_period", "coordinator_cycle",
      "output",   "event_log",  "format"};
  return keys;
}

inline std::vector<std::pair<DeviceId, DeviceId>> parse_pairs_string(const std::string& s) {
  std::vector<std::pair<DeviceId, DeviceId>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto text = trim(item);
    if (text.empty()) continue;
    const auto dash = text.find('-');
    if (dash == std::string_view::npos) throw ConfigError("pair '" + std::string(text) + "' must look like S-R");
    const auto a = parse_int(trim(text.substr(0, dash)));
    const auto b = parse_int(trim(text.substr(dash + 1)));
    if (!a || !b) throw ConfigError("pair '" + std::string(text) + "' must look like S-R");
    out.emplace_back(static_cast<DeviceId>(*a), static_cast<DeviceId>(*b));
  }
  return out;
}

inline std::vector<std::uint64_t> parse_seeds(const nlohmann::json& j) {
  std::vector<std::uint64_t> out;
  if (j.is_number_unsigned() || j.is_number_integer()) return {j.get<std::uint64_t>()};
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(v.get<std::uint64_t>());
    if (out.empty()) throw ConfigError("seeds list is empty");
    return out;
  }
  if (j.is_object()) {
    const auto count = j.at("count").get<std::int64_t>();
    const auto start = j.value("start", std::uint64_t{1});
    if (count < 1) throw ConfigError("seeds.count must be >= 1");
    for (std::int64_t i = 0; i < count; ++i) out.push_back(start + static_cast<std::uint64_t>(i));
    return out;
  }
  if (j.is_string()) {
    // "1,2,3" or "1..20"
    const auto s = j.get<std::string>();
    if (const auto dots = s.find(".."); dots != std::string::npos) {
      const auto lo = parse_int(trim(std::string_view(s).substr(0, dots)));
      const auto hi = parse_int(trim(std::string_view(s).substr(dots + 2)));
      if (!lo || !hi || *lo < 0 || *hi < *lo) throw ConfigError("seed range '" + s + "' must look like LO..HI");
      for (auto v = *lo; v <= *hi; ++v) out.push_back(static_cast<std::uint64_t>(v));
      return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto v = parse_int(trim(item));
      if (!v || *v < 0) throw ConfigError("seed '" + item + "' is not a non-negative integer");
      out.push_back(static_cast<std::uint64_t>(*v));
    }
    if (out.empty()) throw ConfigError("seeds list is empty");
    return out;
  }
  throw ConfigError("seeds must be an integer, a list, a string or {count, start}");
}

}  // namespace detail

/// Checks everything that does not depend on running anything. Returns an
/// empty string when the config is usable.
inline std::string config_violation(const ScenarioConfig& c) {
  if (c.n_devices < 1) return "n_devices must be >= 1";
  if (auto why = CycleConfig{c.t_dist, c.t_b, c.n_devices, c.slot_ms}.violation(); !why.empty()) return why;
  if (!(c.failure_rate >= 0.0 && c.failure_rate <= 1.0)) return "failure_rate must be in [0, 1]";
  if (c.items_per_device < 0) return "items_per_device must be >= 0";
  if (c.slot_limit < 1) return "slot_limit must be >= 1";
  if (c.query_period < 0) return "query_period must be >= 0";
  if (c.coordinator_cycle < 1) return "coordinator_cycle must be >= 1";
  if (c.find_p && !(*c.find_p > 0.0 && *c.find_p <= 1.0)) return "find_p must be in (0, 1]";
  if (c.seeds.empty()) return "at least one seed is required";
  if (c.mode == Mode::Aggregate) {
    if (c.n_devices < 2) return "aggregate mode needs at least 2 devices";
    if (c.pattern == Pattern::Pairs) return "use pairwise mode for explicit pairs";
    if (c.pattern == Pattern::Ring && (c.resolved_elements() < 1 || c.resolved_elements() > c.n_devices))
      return "n_elements must be in [1, n_devices]";
  }
  if (c.mode == Mode::Pairwise) {
    if (c.pairs.empty() && c.n_devices % 2 != 0)
      return "pairwise mode needs an even device count or an explicit pair list";
    if (!c.pairs.empty()) {
      auto v = validate_schedule(build_pair_schedule(c.n_devices, c.pairs));
      if (!v.empty()) return "pair list: " + v.front().message;
    }
  }
  try {
    (void)parse_charging_spec(c.charging, c.slot_ms);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

/// Builds a config from a JSON object. Unknown keys are errors.
inline ScenarioConfig parse_config_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!detail::known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  ScenarioConfig c;
  try {
    if (j.contains("protocol")) c.protocol = parse_protocol(j["protocol"].get<std::string>());
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("pattern")) c.pattern = parse_pattern(j["pattern"].get<std::string>());
    if (j.contains("n_devices")) c.n_devices = j["n_devices"].get<int>();
    if (j.contains("t_dist")) c.t_dist = j["t_dist"].get<std::int64_t>();
    bool tb_auto = true;
    if (j.contains("t_b")) {
      const auto& v = j["t_b"];
      if (v.is_string()) {
        if (v.get<std::string>() != "auto") {
          const auto n = detail::parse_int(v.get<std::string>());
          if (!n) throw ConfigError("t_b must be an integer or 'auto'");
          c.t_b = *n;
          tb_auto = false;
        }
      } else {
        c.t_b = v.get<std::int64_t>();
        tb_auto = false;
      }
    }
    if (tb_auto) {
      if (c.t_dist < 2) throw ConfigError("t_b auto needs t_dist >= 2");
      c.t_b = smallest_coprime_ge2(c.t_dist);
    }
    if (j.contains("charging")) c.charging = j["charging"].get<std::string>();
    if (j.contains("slot_ms")) c.slot_ms = j["slot_ms"].get<double>();
    if (j.contains("failure_rate")) c.failure_rate = j["failure_rate"].get<double>();
    if (j.contains("nvm")) c.nvm = j["nvm"].get<bool>();
    if (j.contains("items_per_device")) c.items_per_device = j["items_per_device"].get<int>();
    if (j.contains("n_elements")) {
      const auto& v = j["n_elements"];
      c.n_elements = (v.is_string() && v.get<std::string>() == "auto") || v.is_null() ? 0 : v.get<int>();
      if (c.n_elements < 0) throw ConfigError("n_elements must be positive");
    }
    if (j.contains("pairs")) {
      const auto& v = j["pairs"];
      if (v.is_string()) {
        c.pairs = detail::parse_pairs_string(v.get<std::string>());
      } else {
        for (const auto& p : v) {
          if (!p.is_array() || p.size() != 2) throw ConfigError("pairs must be [[sender, receiver], ...]");
          c.pairs.emplace_back(p[0].get<DeviceId>(), p[1].get<DeviceId>());
        }
      }
    }
    if (j.contains("op")) c.op = parse_agg_op(j["op"].get<std::string>());
    if (j.contains("seed") && j.contains("seeds")) throw ConfigError("give either seed or seeds, not both");
    if (j.contains("seed")) c.seeds = detail::parse_seeds(j["seed"]);
    if (j.contains("seeds")) c.seeds = detail::parse_seeds(j["seeds"]);
    if (j.contains("slot_limit")) {
      const auto& v = j["slot_limit"];
      c.slot_limit = v.is_number_integer() ? v.get<Slot>() : static_cast<Slot>(v.get<double>());
    }
    if (j.contains("find_p")) {
      const auto& v = j["find_p"];
      if (v.is_string() && v.get<std::string>() == "auto") c.find_p.reset();
      else if (v.is_null()) c.find_p.reset();
      else c.find_p = v.get<double>();
    }
    if (j.contains("query_period")) c.query_period = j["query_period"].get<int>();
    if (j.contains("coordinator_cycle")) c.coordinator_cycle = j["coordinator_cycle"].get<std::int64_t>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("event_log")) c.event_log = j["event_log"].get<std::string>();
    if (j.contains("format")) c.format = parse_format(j["format"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (c.mode == Mode::Pairwise) c.pattern = Pattern::Pairs;
  if (auto why = config_violation(c); !why.empty()) throw ConfigError(why);
  return c;
}

/// Canonical JSON for a config. Every field is present, so the output doubles
/// as run metadata.
inline nlohmann::json render_config(const ScenarioConfig& c) {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [a, b] : c.pairs) pairs.push_back({a, b});
  return {{"protocol", std::string(protocol_name(c.protocol))},
          {"mode", std::string(mode_name(c.mode))},
          {"pattern", std::string(pattern_name(c.pattern))},
          {"n_devices", c.n_devices},
          {"t_dist", c.t_dist},
          {"t_b", c.t_b},
          {"charging", c.charging},
          {"slot_ms", c.slot_ms},
          {"failure_rate", c.failure_rate},
          {"nvm", c.nvm},
          {"items_per_device", c.items_per_device},
          {"n_elements", c.n_elements},
          {"pairs", pairs},
          {"op", std::string(agg_op_name(c.op))},
          {"seeds", c.seeds},
          {"slot_limit", c.slot_limit},
          {"find_p", c.find_p ? nlohmann::json(*c.find_p) : nlohmann::json("auto")},
          {"query_period", c.query_period},
          {"coordinator_cycle", c.coordinator_cycle},
          {"output", c.output},
          {"event_log", c.event_log},
          {"format", std::string(format_name(c.format))}};
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

/// Applies `patch` key by key on top of `base` (flags override the file).
inline nlohmann::json overlay(nlohmann::json base, const nlohmann::json& patch) {
  if (base.is_null()) base = nlohmann::json::object();
  for (const auto& [k, v] : patch.items()) {
    if (k == "seed") base.erase("seeds");
    if (k == "seeds") base.erase("seed");
    base[k] = v;
  }
  return base;
}

/// Resolves a relative output path against FREEBEACON_OUT_DIR when set.
inline std::string resolve_output_path(const std::string& path) {
  if (path.empty() || path == "-") return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  if (const char* dir = std::getenv("FREEBEACON_OUT_DIR"); dir != nullptr && *dir != '\0')
    return (std::filesystem::path(dir) / p).string();
  return path;
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the fields that determine a run's behaviour (not seeds or output
/// locations). The find_p entry is the value actually used.
inline std::string config_hash(const ScenarioConfig& c, double find_p_used) {
  auto j = render_config(c);
  for (const char* k : {"seeds", "output", "event_log", "format"}) j.erase(k);
  if (c.protocol == Protocol::Find) j["find_p"] = find_p_used;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace freebeacon
