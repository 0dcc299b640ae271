#pragma once

// Communication schedules for aggregation: line, binomial tree, ring
// reduce-scatter, and explicit pair lists. Device ids are 0-based.

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "freebeacon/arith.hpp"
#include "freebeacon/d2d.hpp"

namespace freebeacon {

enum class Pattern : std::uint8_t { Line, Tree, Ring, Pairs };

constexpr std::string_view pattern_name(Pattern p) noexcept {
  switch (p) {
    case Pattern::Line: return "line";
    case Pattern::Tree: return "tree";
    case Pattern::Ring: return "ring";
    case Pattern::Pairs: return "pairs";
  }
  return "?";
}

inline Pattern parse_pattern(std::string_view s) {
  if (s == "line") return Pattern::Line;
  if (s == "tree") return Pattern::Tree;
  if (s == "ring") return Pattern::Ring;
  if (s == "pairs") return Pattern::Pairs;
  throw ConfigError("unknown pattern '" + std::string(s) + "' (expected line, tree, ring or pairs)");
}

struct Pair {
  DeviceId sender = 0;
  DeviceId receiver = 0;
  Jumper jumper = Jumper::Sender;
  int element = 0;
  bool operator==(const Pair&) const = default;
};

/// One engine round. Ring logical rounds are split into several phases so
/// that no device sends and receives in the same round.
struct Round {
  int logical_round = 1;
  int phase = 0;
  std::vector<Pair> pairs;
  bool operator==(const Round&) const = default;
};

struct Schedule {
  Pattern pattern = Pattern::Line;
  int n_devices = 0;
  int n_elements = 1;
  std::vector<Round> rounds;
  bool operator==(const Schedule&) const = default;
};

inline Jumper expected_jumper(Pattern p) noexcept { return p == Pattern::Tree ? Jumper::Receiver : Jumper::Sender; }

inline Schedule build_line_schedule(int n) {
  if (n < 2) throw ConfigError("line schedule needs at least 2 devices");
  Schedule s{Pattern::Line, n, 1, {}};
  for (int r = 1; r <= n - 1; ++r) s.rounds.push_back({r, 0, {{r - 1, r, Jumper::Sender, 0}}});
  return s;
}

/// Binomial tree. Built 1-based: in round r every j = 2^(r-1) (mod 2^r) sends
/// to min(j + 2^(r-1), n); the last device absorbs what would fall off the end.
inline Schedule build_tree_schedule(int n) {
  if (n < 2) throw ConfigError("tree schedule needs at least 2 devices");
  Schedule s{Pattern::Tree, n, 1, {}};
  for (std::int64_t half = 1, r = 1; half < n; half *= 2, ++r) {
    Round round{static_cast<int>(r), 0, {}};
    for (std::int64_t j = half; j <= n; j += 2 * half) {
      const std::int64_t to = std::min<std::int64_t>(j + half, n);
      if (to == j) continue;
      round.pairs.push_back({static_cast<DeviceId>(j - 1), static_cast<DeviceId>(to - 1), Jumper::Receiver, 0});
    }
    if (!round.pairs.empty()) s.rounds.push_back(std::move(round));
  }
  return s;
}

/// Ring reduce-scatter over n_elements tokens. Token j starts at device j and
/// in round r is sent by (j + r - 1) mod n to its successor; after n - 1
/// rounds token j is complete at device (j - 1) mod n. Each logical round is
/// split into phase 0 (even senders), 1 (odd senders) and, for odd n, 2 (the
/// wrap pair n-1 -> 0, whose ends are both even).
inline Schedule build_ring_schedule(int n, int n_elements) {
  if (n < 2) throw ConfigError("ring schedule needs at least 2 devices");
  if (n_elements < 1 || n_elements > n)
    throw ConfigError("ring schedule needs 1 <= n_elements <= n_devices (got " + std::to_string(n_elements) + ")");
  Schedule s{Pattern::Ring, n, n_elements, {}};
  for (int r = 1; r <= n - 1; ++r) {
    Round phases[3] = {{r, 0, {}}, {r, 1, {}}, {r, 2, {}}};
    for (int j = 0; j < n_elements; ++j) {
      const int from = static_cast<int>(mod_pos(j + r - 1, n));
      const int to = (from + 1) % n;
      const int phase = (n % 2 == 1 && from == n - 1) ? 2 : from % 2;
      phases[phase].pairs.push_back({from, to, Jumper::Sender, j});
    }
    for (auto& ph : phases)
      if (!ph.pairs.empty()) s.rounds.push_back(std::move(ph));
  }
  return s;
}

/// Single-round schedule from explicit (sender, receiver) pairs.
inline Schedule build_pair_schedule(int n, const std::vector<std::pair<DeviceId, DeviceId>>& pairs) {
  Schedule s{Pattern::Pairs, n, 1, {{1, 0, {}}}};
  for (auto [a, b] : pairs) s.rounds.front().pairs.push_back({a, b, Jumper::Sender, 0});
  return s;
}

/// (0 -> 1), (2 -> 3), ...; an odd last device sits out.
inline std::vector<std::pair<DeviceId, DeviceId>> default_pairs(int n) {
  std::vector<std::pair<DeviceId, DeviceId>> out;
  for (int i = 0; i + 1 < n; i += 2) out.emplace_back(i, i + 1);
  return out;
}

struct Violation {
  std::string code;  // duplicate_role | self_pair | out_of_range | jumper_mismatch | bad_element | empty
  int round_index = -1;
  DeviceId device = -1;
  std::string message;
  bool operator==(const Violation&) const = default;
};

inline std::vector<Violation> validate_schedule(const Schedule& s) {
  std::vector<Violation> out;
  if (s.rounds.empty()) out.push_back({"empty", -1, -1, "schedule has no rounds"});
  for (std::size_t ri = 0; ri < s.rounds.size(); ++ri) {
    const int r = static_cast<int>(ri);
    std::vector<int> seen(static_cast<std::size_t>(std::max(s.n_devices, 0)), 0);
    auto claim = [&](DeviceId d) {
      if (d < 0 || d >= s.n_devices) {
        out.push_back({"out_of_range", r, d, "round " + std::to_string(r) + ": device " + std::to_string(d) +
                                                 " outside [0, " + std::to_string(s.n_devices) + ")"});
        return;
      }
      if (++seen[static_cast<std::size_t>(d)] == 2)
        out.push_back({"duplicate_role", r, d,
                       "round " + std::to_string(r) + ": device " + std::to_string(d) + " holds more than one role"});
    };
    for (const auto& p : s.rounds[ri].pairs) {
      if (p.sender == p.receiver)
        out.push_back({"self_pair", r, p.sender, "round " + std::to_string(r) + ": device " + std::to_string(p.sender) +
                                                      " paired with itself"});
      claim(p.sender);
      if (p.receiver != p.sender) claim(p.receiver);
      if (p.jumper != expected_jumper(s.pattern))
        out.push_back({"jumper_mismatch", r, p.sender,
                       "round " + std::to_string(r) + ": jumper does not match " + std::string(pattern_name(s.pattern)) +
                           " pattern"});
      if (p.element < 0 || p.element >= s.n_elements)
        out.push_back({"bad_element", r, p.sender, "round " + std::to_string(r) + ": element " +
                                                       std::to_string(p.element) + " outside [0, " +
                                                       std::to_string(s.n_elements) + ")"});
    }
  }
  return out;
}

// JSON form: {"pattern", "n_devices", "n_elements", "rounds": [{"round", "phase",
// "pairs": [{"sender", "receiver", "jumper", "element"}]}]}

inline nlohmann::json schedule_to_json(const Schedule& s) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : s.rounds) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : r.pairs)
      pairs.push_back({{"sender", p.sender},
                       {"receiver", p.receiver},
                       {"jumper", p.jumper == Jumper::Sender ? "sender" : "receiver"},
                       {"element", p.element}});
    rounds.push_back({{"round", r.logical_round}, {"phase", r.phase}, {"pairs", std::move(pairs)}});
  }
  return {{"pattern", std::string(pattern_name(s.pattern))},
          {"n_devices", s.n_devices},
          {"n_elements", s.n_elements},
          {"rounds", std::move(rounds)}};
}

inline Schedule schedule_from_json(const nlohmann::json& j) {
  try {
    Schedule s;
    s.pattern = parse_pattern(j.at("pattern").get<std::string>());
    s.n_devices = j.at("n_devices").get<int>();
    s.n_elements = j.value("n_elements", 1);
    for (const auto& rj : j.at("rounds")) {
      Round r{rj.value("round", 1), rj.value("phase", 0), {}};
      for (const auto& pj : rj.at("pairs")) {
        const auto jumper =
            pj.value("jumper", std::string(expected_jumper(s.pattern) == Jumper::Sender ? "sender" : "receiver"));
        if (jumper != "sender" && jumper != "receiver") throw ConfigError("jumper must be 'sender' or 'receiver'");
        r.pairs.push_back({pj.at("sender").get<DeviceId>(), pj.at("receiver").get<DeviceId>(),
                           jumper == "sender" ? Jumper::Sender : Jumper::Receiver, pj.value("element", 0)});
      }
      s.rounds.push_back(std::move(r));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schedule: ") + e.what());
  }
}

}  // namespace freebeacon
