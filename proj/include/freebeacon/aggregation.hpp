#pragma once

// Expands a schedule into per-device action lists and keeps the data ledger
// (partial aggregates) that survives device resets.
//
// Every action is one pairwise rendezvous carrying a global key. Each device
// works through its actions in key order, and the globally smallest
// unfinished action is always the current action of both of its parties, so
// execution cannot deadlock while still letting later waves overlap.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freebeacon/radio.hpp"
#include "freebeacon/rng.hpp"
#include "freebeacon/schedule.hpp"

namespace freebeacon {

enum class AggOp : std::uint8_t { Sum, Max, Count };

constexpr std::string_view agg_op_name(AggOp op) noexcept {
  switch (op) {
    case AggOp::Sum: return "sum";
    case AggOp::Max: return "max";
    case AggOp::Count: return "count";
  }
  return "?";
}

inline AggOp parse_agg_op(std::string_view s) {
  if (s == "sum") return AggOp::Sum;
  if (s == "max") return AggOp::Max;
  if (s == "count") return AggOp::Count;
  throw ConfigError("unknown aggregate operator '" + std::string(s) + "'");
}

constexpr std::int64_t agg_identity(AggOp op) noexcept {
  return op == AggOp::Max ? std::numeric_limits<std::int64_t>::min() : 0;
}
constexpr std::int64_t agg_lift(AggOp op, std::int64_t item) noexcept { return op == AggOp::Count ? 1 : item; }
constexpr std::int64_t agg_combine(AggOp op, std::int64_t a, std::int64_t b) noexcept {
  return op == AggOp::Max ? std::max(a, b) : a + b;
}

/// Identifies one aggregate: item wave (ring batch) and element within it.
using PartialKey = std::pair<int, int>;

struct Action {
  std::int64_t key = 0;  ///< global order, shared by both parties
  bool send = false;
  DeviceId peer = 0;
  Jumper jumper = Jumper::Sender;
  PartialKey partial{0, 0};
};

class ContributorSet {
 public:
  ContributorSet() = default;
  explicit ContributorSet(std::vector<std::uint64_t> words) : words_(std::move(words)) {}

  void insert(DeviceId d) {
    const auto w = static_cast<std::size_t>(d) / 64;
    if (words_.size() <= w) words_.resize(w + 1, 0);
    words_[w] |= std::uint64_t{1} << (static_cast<unsigned>(d) % 64);
  }
  [[nodiscard]] bool contains(DeviceId d) const {
    const auto w = static_cast<std::size_t>(d) / 64;
    return w < words_.size() && ((words_[w] >> (static_cast<unsigned>(d) % 64)) & 1U) != 0;
  }
  /// Merges other in; returns how many members were already present.
  int merge(const ContributorSet& other) {
    int overlap = 0;
    if (words_.size() < other.words_.size()) words_.resize(other.words_.size(), 0);
    for (std::size_t i = 0; i < other.words_.size(); ++i) {
      overlap += std::popcount(words_[i] & other.words_[i]);
      words_[i] |= other.words_[i];
    }
    return overlap;
  }
  [[nodiscard]] int size() const {
    int n = 0;
    for (auto w : words_) n += std::popcount(w);
    return n;
  }
  [[nodiscard]] const std::vector<std::uint64_t>& words() const { return words_; }
  bool operator==(const ContributorSet& o) const {
    const auto n = std::max(words_.size(), o.words_.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = i < words_.size() ? words_[i] : 0;
      const auto b = i < o.words_.size() ? o.words_[i] : 0;
      if (a != b) return false;
    }
    return true;
  }

 private:
  std::vector<std::uint64_t> words_;
};

struct Partial {
  std::int64_t value = 0;
  ContributorSet contributors;
  bool shipped = false;
};

/// Everything the executor needs: action lists, injected items and the
/// initial partials. Device ids index the vectors directly.
struct AggregationPlan {
  AggOp op = AggOp::Sum;
  int n_devices = 0;
  std::vector<std::vector<Action>> actions;               // sorted by key
  std::vector<std::map<PartialKey, std::int64_t>> items;  // injected item per device and key

  [[nodiscard]] std::size_t total_actions() const {
    std::size_t n = 0;
    for (const auto& a : actions) n += a.size();
    return n;
  }
};

namespace detail {

inline void add_schedule_wave(AggregationPlan& plan, const Schedule& s, int wave, std::int64_t key_base) {
  for (std::size_t ri = 0; ri < s.rounds.size(); ++ri) {
    const std::int64_t key = key_base + static_cast<std::int64_t>(ri);
    for (const auto& p : s.rounds[ri].pairs) {
      const PartialKey pk{wave, p.element};
      plan.actions[static_cast<std::size_t>(p.sender)].push_back({key, true, p.receiver, p.jumper, pk});
      plan.actions[static_cast<std::size_t>(p.receiver)].push_back({key, false, p.sender, p.jumper, pk});
    }
  }
}

}  // namespace detail

/// Item values drawn from a dedicated stream so plans are reproducible.
inline std::int64_t draw_item(RngStream& rng) { return rng.uniform_int(-1000, 1000); }

inline constexpr std::uint64_t kItemStream = 0x17E45;

/// Expands `pattern` over items_per_device items per device. Line and tree run
/// one wave per item; ring packs n_elements items per batch (the last batch
/// may be smaller); pairs ship each sender's items to its receiver.
inline AggregationPlan build_plan(Pattern pattern, int n, int items_per_device, int n_elements, AggOp op,
                                  std::uint64_t seed,
                                  const std::vector<std::pair<DeviceId, DeviceId>>& pairs = {}) {
  if (items_per_device < 0) throw ConfigError("items_per_device must be >= 0");
  AggregationPlan plan;
  plan.op = op;
  plan.n_devices = n;
  plan.actions.assign(static_cast<std::size_t>(n), {});
  plan.items.assign(static_cast<std::size_t>(n), {});
  RngStream rng(seed, kItemStream);
  const int k = items_per_device;

  switch (pattern) {
    case Pattern::Line:
    case Pattern::Tree: {
      const Schedule s = pattern == Pattern::Line ? build_line_schedule(n) : build_tree_schedule(n);
      const auto stride = static_cast<std::int64_t>(s.rounds.size());
      for (int w = 0; w < k; ++w) {
        for (int d = 0; d < n; ++d) plan.items[static_cast<std::size_t>(d)][{w, 0}] = draw_item(rng);
        detail::add_schedule_wave(plan, s, w, w * stride);
      }
      break;
    }
    case Pattern::Ring: {
      const Schedule full = build_ring_schedule(n, n_elements);
      const auto stride = static_cast<std::int64_t>(full.rounds.size());
      const int batches = (k + n_elements - 1) / n_elements;
      for (int b = 0; b < batches; ++b) {
        const int e = std::min(n_elements, k - b * n_elements);
        for (int d = 0; d < n; ++d)
          for (int j = 0; j < e; ++j) plan.items[static_cast<std::size_t>(d)][{b, j}] = draw_item(rng);
        detail::add_schedule_wave(plan, e == n_elements ? full : build_ring_schedule(n, e), b, b * stride);
      }
      break;
    }
    case Pattern::Pairs: {
      const auto list = pairs.empty() ? default_pairs(n) : pairs;
      Schedule s = build_pair_schedule(n, list);
      if (auto v = validate_schedule(s); !v.empty()) throw ConfigError("invalid pair list: " + v.front().message);
      // Each pair carries its own aggregate.
      s.n_elements = static_cast<int>(list.size());
      for (std::size_t i = 0; i < list.size(); ++i) s.rounds.front().pairs[i].element = static_cast<int>(i);
      for (int w = 0; w < k; ++w) {
        for (std::size_t i = 0; i < list.size(); ++i)
          plan.items[static_cast<std::size_t>(list[i].first)][{w, static_cast<int>(i)}] = draw_item(rng);
        detail::add_schedule_wave(plan, s, w, w);
      }
      break;
    }
  }
  for (auto& a : plan.actions)
    std::stable_sort(a.begin(), a.end(), [](const Action& x, const Action& y) { return x.key < y.key; });
  return plan;
}

/// Per-device persistent data: partials and which actions are finished.
/// Actions finish in list order, so `cursor` is the first unfinished one.
struct DataLedger {
  std::map<PartialKey, Partial> partials;
  std::size_t cursor = 0;
  std::int64_t duplicate_merges = 0;
};

inline std::vector<DataLedger> initial_ledgers(const AggregationPlan& plan) {
  std::vector<DataLedger> out(static_cast<std::size_t>(plan.n_devices));
  for (std::size_t d = 0; d < out.size(); ++d)
    for (const auto& [key, item] : plan.items[d]) {
      Partial p{agg_lift(plan.op, item), {}, false};
      p.contributors.insert(static_cast<DeviceId>(d));
      out[d].partials.emplace(key, std::move(p));
    }
  return out;
}

/// Folds an incoming payload into the partial for `key`.
inline void merge_payload(DataLedger& ledger, AggOp op, const PartialKey& key, const Payload& payload) {
  auto [it, fresh] = ledger.partials.try_emplace(key, Partial{agg_identity(op), {}, false});
  auto& p = it->second;
  p.value = agg_combine(op, p.value, payload.value);
  ledger.duplicate_merges += p.contributors.merge(ContributorSet(payload.contributors));
}

inline Payload payload_of(const DataLedger& ledger, const PartialKey& key) {
  auto it = ledger.partials.find(key);
  if (it == ledger.partials.end()) return {};
  return {it->second.value, it->second.contributors.words()};
}

struct AggregateCheck {
  bool ok = false;
  std::string detail;
};

/// For every aggregate: exactly one device still holds it unshipped, its
/// contributors are exactly the devices that injected an item for it, and
/// its value equals a fold over those items.
inline AggregateCheck check_aggregates(const AggregationPlan& plan, const std::vector<DataLedger>& ledgers) {
  std::map<PartialKey, std::pair<ContributorSet, std::int64_t>> expected;
  for (int d = 0; d < plan.n_devices; ++d)
    for (const auto& [key, item] : plan.items[static_cast<std::size_t>(d)]) {
      auto [it, fresh] = expected.try_emplace(key, ContributorSet{}, agg_identity(plan.op));
      it->second.first.insert(d);
      it->second.second = agg_combine(plan.op, it->second.second, agg_lift(plan.op, item));
    }
  for (const auto& l : ledgers)
    if (l.duplicate_merges != 0) return {false, "duplicate contributions merged"};
  for (const auto& [key, want] : expected) {
    int holders = 0;
    const Partial* held = nullptr;
    for (const auto& l : ledgers) {
      auto it = l.partials.find(key);
      if (it == l.partials.end() || it->second.shipped) continue;
      ++holders;
      held = &it->second;
    }
    const std::string name = "(" + std::to_string(key.first) + "," + std::to_string(key.second) + ")";
    if (holders != 1) return {false, "aggregate " + name + " has " + std::to_string(holders) + " holders"};
    if (!(held->contributors == want.first)) return {false, "aggregate " + name + " is missing contributions"};
    if (held->value != want.second)
      return {false, "aggregate " + name + " = " + std::to_string(held->value) + ", expected " +
                         std::to_string(want.second)};
  }
  return {true, {}};
}

}  // namespace freebeacon
