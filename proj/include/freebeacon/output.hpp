#pragma once

// Metric rows as CSV or JSON lines. Column order is fixed; every row carries
// the config hash, seed and full resolved config so it can be rerun alone.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "freebeacon/config.hpp"
#include "freebeacon/runner.hpp"

namespace freebeacon {

namespace detail {

/// Shortest decimal that round-trips, so output never depends on locale or
/// printf precision.
inline std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return {buf, ptr};
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string pairs_text(const ScenarioConfig& c) {
  std::string s;
  for (auto [a, b] : c.pairs) s += (s.empty() ? "" : " ") + std::to_string(a) + "-" + std::to_string(b);
  return s;
}

}  // namespace detail

/// A value in a metric row. Empty optional renders as "" (csv) / null (json).
struct Cell {
  enum class Kind { Int, Double, Text, Bool } kind = Kind::Int;
  std::optional<std::int64_t> i;
  std::optional<double> d;
  std::string text;
  bool b = false;
  bool missing = false;
};

inline Cell cell_int(std::int64_t v) { return {Cell::Kind::Int, v, {}, {}, false, false}; }
inline Cell cell_opt(std::optional<std::int64_t> v) { return {Cell::Kind::Int, v, {}, {}, false, !v.has_value()}; }
inline Cell cell_double(double v) { return {Cell::Kind::Double, {}, v, {}, false, false}; }
inline Cell cell_opt_double(std::optional<double> v) { return {Cell::Kind::Double, {}, v, {}, false, !v.has_value()}; }
inline Cell cell_text(std::string v) { return {Cell::Kind::Text, {}, {}, std::move(v), false, false}; }
inline Cell cell_bool(bool v) { return {Cell::Kind::Bool, {}, {}, {}, v, false}; }

using Record = std::vector<std::pair<std::string, Cell>>;

inline void append_config(Record& r, const ScenarioConfig& c, double find_p) {
  r.emplace_back("protocol", cell_text(std::string(protocol_name(c.protocol))));
  r.emplace_back("mode", cell_text(std::string(mode_name(c.mode))));
  r.emplace_back("pattern", cell_text(std::string(pattern_name(c.pattern))));
  r.emplace_back("n_devices", cell_int(c.n_devices));
  r.emplace_back("t_dist", cell_int(c.t_dist));
  r.emplace_back("t_b", cell_int(c.t_b));
  r.emplace_back("charging", cell_text(c.charging));
  r.emplace_back("slot_ms", cell_double(c.slot_ms));
  r.emplace_back("failure_rate", cell_double(c.failure_rate));
  r.emplace_back("nvm", cell_bool(c.nvm));
  r.emplace_back("items_per_device", cell_int(c.items_per_device));
  r.emplace_back("n_elements", cell_int(c.mode == Mode::Aggregate && c.pattern == Pattern::Ring ? c.resolved_elements() : 1));
  r.emplace_back("pairs", cell_text(detail::pairs_text(c)));
  r.emplace_back("op", cell_text(std::string(agg_op_name(c.op))));
  r.emplace_back("find_p", c.protocol == Protocol::Find ? cell_double(find_p) : cell_opt_double(std::nullopt));
  r.emplace_back("find_p_tuned", cell_bool(c.protocol == Protocol::Find && !c.find_p.has_value()));
  r.emplace_back("query_period", cell_int(c.query_period));
  r.emplace_back("coordinator_cycle", cell_int(c.coordinator_cycle));
  r.emplace_back("slot_limit", cell_int(c.slot_limit));
}

inline Record run_record(const RunRow& row) {
  const auto& m = row.metrics;
  Record r;
  r.emplace_back("config_hash", cell_text(config_hash(row.config, row.find_p)));
  r.emplace_back("seed", cell_int(static_cast<std::int64_t>(row.seed)));
  append_config(r, row.config, row.find_p);
  r.emplace_back("end_reason", cell_text(std::string(end_reason_name(m.end_reason))));
  r.emplace_back("completion_slot", cell_opt(m.completion_slot));
  r.emplace_back("completion_seconds",
                 cell_opt_double(m.completion_slot ? std::optional<double>(static_cast<double>(*m.completion_slot) *
                                                                           row.config.slot_ms / 1000.0)
                                                   : std::nullopt));
  r.emplace_back("discovery_complete_slot", cell_opt(m.discovery_complete));
  r.emplace_back("pairings_completed", cell_int(m.pairings_completed));
  r.emplace_back("actions_total", cell_int(m.actions_total));
  r.emplace_back("aggregate_ok", cell_bool(m.aggregate_ok));
  r.emplace_back("collisions", cell_int(m.collisions));
  r.emplace_back("shared_wake_slots", cell_int(m.shared_wake_slots));
  r.emplace_back("wakes", cell_int(m.wakes));
  r.emplace_back("failures", cell_int(m.failures));
  r.emplace_back("corrections", cell_int(m.corrections));
  r.emplace_back("query_resyncs", cell_int(m.query_resyncs));
  r.emplace_back("duplicate_acks", cell_int(m.duplicate_acks));
  r.emplace_back("frames_sent", cell_int(FrameCounters::total(m.frames.sent)));
  r.emplace_back("frames_delivered", cell_int(FrameCounters::total(m.frames.delivered)));
  r.emplace_back("frames_collided", cell_int(FrameCounters::total(m.frames.collided)));
  r.emplace_back("frames_unheard", cell_int(FrameCounters::total(m.frames.unheard)));
  for (int k = 0; k < kFrameKindCount; ++k) {
    std::string name(frame_kind_name(static_cast<FrameKind>(k)));
    for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    r.emplace_back(name + "_sent", cell_int(m.frames.sent[static_cast<std::size_t>(k)]));
  }
  return r;
}

inline Record summary_record(const SummaryRow& s) {
  Record r;
  r.emplace_back("config_hash", cell_text(config_hash(s.config, s.find_p)));
  append_config(r, s.config, s.find_p);
  r.emplace_back("runs", cell_int(s.runs));
  r.emplace_back("completed", cell_int(s.completed));
  r.emplace_back("completion_mean", cell_opt_double(s.mean));
  r.emplace_back("completion_median", cell_opt_double(s.median));
  r.emplace_back("completion_p25", cell_opt_double(s.p25));
  r.emplace_back("completion_p75", cell_opt_double(s.p75));
  r.emplace_back("discovery_mean", cell_opt_double(s.mean_discovery));
  return r;
}

inline std::string csv_cell(const Cell& c) {
  if (c.missing) return "";
  switch (c.kind) {
    case Cell::Kind::Int: return std::to_string(*c.i);
    case Cell::Kind::Double: return detail::fmt_double(*c.d);
    case Cell::Kind::Text: return detail::csv_escape(c.text);
    case Cell::Kind::Bool: return c.b ? "1" : "0";
  }
  return "";
}

inline nlohmann::ordered_json json_cell(const Cell& c) {
  if (c.missing) return nullptr;
  switch (c.kind) {
    case Cell::Kind::Int: return *c.i;
    case Cell::Kind::Double: return *c.d;
    case Cell::Kind::Text: return c.text;
    case Cell::Kind::Bool: return c.b;
  }
  return nullptr;
}

/// Writes records with a header line (csv) or one object per line (jsonl).
inline void write_records(std::ostream& os, const std::vector<Record>& rows, OutputFormat format) {
  if (rows.empty()) throw std::invalid_argument("no rows to write");
  if (format == OutputFormat::Csv) {
    for (std::size_t i = 0; i < rows.front().size(); ++i) os << (i ? "," : "") << rows.front()[i].first;
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_cell(r[i].second);
      os << '\n';
    }
    return;
  }
  for (const auto& r : rows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r) j[k] = json_cell(v);
    os << j.dump() << '\n';
  }
}

inline void write_metrics(std::ostream& os, const std::vector<RunRow>& rows, OutputFormat format) {
  std::vector<Record> recs;
  for (const auto& r : rows) recs.push_back(run_record(r));
  write_records(os, recs, format);
}

inline void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows, OutputFormat format) {
  std::vector<Record> recs;
  for (const auto& r : rows) recs.push_back(summary_record(r));
  write_records(os, recs, format);
}

/// File variant; throws std::runtime_error if the path cannot be written.
inline void write_metrics(const std::string& path, const std::vector<RunRow>& rows, OutputFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_metrics(out, rows, format);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace freebeacon
