// freebeacon: command-line front end for the simulator.
//
// Exit codes: 0 ok, 1 config error, 2 run aborted, 3 sweep over budget.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "freebeacon/freebeacon.hpp"

namespace fb = freebeacon;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitAborted = 2;
constexpr int kExitBudget = 3;

struct RunFlags {
  std::string config_file;
  std::optional<std::int64_t> t_dist;
  std::optional<std::string> t_b;
  std::optional<int> devices;
  std::optional<std::string> charging;
  std::optional<std::string> protocol;
  std::optional<double> failure_rate;
  std::optional<bool> nvm;
  std::optional<int> items;
  std::optional<int> elements;
  std::optional<std::string> pattern;
  std::optional<std::string> pairs;
  std::optional<std::string> op;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
  std::optional<double> slot_limit;
  std::optional<double> slot_ms;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::string> event_log;
  std::optional<std::string> find_p;
  std::optional<int> query_period;
  std::optional<std::int64_t> coordinator_cycle;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool aggregate, bool pairwise) {
  cmd->add_option("--config", f.config_file, "JSON scenario file; flags override its keys");
  cmd->add_option("--tdist", f.t_dist, "distribution cycle length in slots (default 51)");
  cmd->add_option("--tbeacon", f.t_b, "beacon cycle in slots, or 'auto' (smallest co-prime >= 2)");
  cmd->add_option("--devices", f.devices, "number of battery-free devices");
  cmd->add_option("--charging", f.charging, "static:N | uniform:LO:HI | trace:PATH:seconds|slots[:once]");
  cmd->add_option("--protocol", f.protocol, "freebeacon | find | probe");
  cmd->add_option("--failure-rate", f.failure_rate, "reset probability per charging cycle");
  cmd->add_flag("--nvm,!--no-nvm", f.nvm, "keep slot role across resets");
  cmd->add_option("--slot-limit", f.slot_limit, "stop after this many slots (default 3e8)");
  cmd->add_option("--slot-ms", f.slot_ms, "slot length in milliseconds (reporting and trace conversion)");
  cmd->add_option("--seed", f.seed, "single seed");
  cmd->add_option("--seeds", f.seeds, "seed list '1,2,3' or range '1..20'");
  cmd->add_option("--out", f.out, "metrics file (default stdout; relative paths use $FREEBEACON_OUT_DIR)");
  cmd->add_option("--format", f.format, "csv | jsonl");
  cmd->add_option("--event-log", f.event_log, "write slot,kind,src,dst,outcome lines here");
  cmd->add_option("--find-p", f.find_p, "Find geometric parameter, or 'auto' to tune it");
  cmd->add_option("--query-period", f.query_period, "receiver wakes between beacon queries (0 disables)");
  cmd->add_option("--coordinator-cycle", f.coordinator_cycle, "probe coordinator cycle in slots (default 31)");
  if (aggregate || pairwise) {
    cmd->add_option("--items", f.items, "items per device");
    cmd->add_option("--op", f.op, "sum | max | count");
  }
  if (aggregate) {
    cmd->add_option("--pattern", f.pattern, "line | tree | ring");
    cmd->add_option("--elements", f.elements, "ring elements per batch (default n_devices)");
  }
  if (pairwise) cmd->add_option("--pairs", f.pairs, "explicit pairs 'S-R,S-R'");
}

json flags_to_patch(const RunFlags& f) {
  json p = json::object();
  if (f.t_dist) p["t_dist"] = *f.t_dist;
  if (f.t_b) p["t_b"] = *f.t_b;
  if (f.devices) p["n_devices"] = *f.devices;
  if (f.charging) p["charging"] = *f.charging;
  if (f.protocol) p["protocol"] = *f.protocol;
  if (f.failure_rate) p["failure_rate"] = *f.failure_rate;
  if (f.nvm) p["nvm"] = *f.nvm;
  if (f.items) p["items_per_device"] = *f.items;
  if (f.elements) p["n_elements"] = *f.elements;
  if (f.pattern) p["pattern"] = *f.pattern;
  if (f.pairs) p["pairs"] = *f.pairs;
  if (f.op) p["op"] = *f.op;
  if (f.seed) p["seed"] = *f.seed;
  if (f.seeds) p["seeds"] = *f.seeds;
  if (f.slot_limit) p["slot_limit"] = static_cast<fb::Slot>(*f.slot_limit);
  if (f.slot_ms) p["slot_ms"] = *f.slot_ms;
  if (f.out) p["output"] = *f.out;
  if (f.format) p["format"] = *f.format;
  if (f.event_log) p["event_log"] = *f.event_log;
  if (f.find_p) {
    if (*f.find_p == "auto") p["find_p"] = "auto";
    else {
      const auto v = fb::detail::parse_double(*f.find_p);
      if (!v) throw fb::ConfigError("--find-p must be a number or 'auto'");
      p["find_p"] = *v;
    }
  }
  if (f.query_period) p["query_period"] = *f.query_period;
  if (f.coordinator_cycle) p["coordinator_cycle"] = *f.coordinator_cycle;
  return p;
}

/// Opens `path` for writing, or returns stdout for "" / "-".
std::ostream& open_output(const std::string& path, std::unique_ptr<std::ofstream>& holder) {
  if (path.empty() || path == "-") return std::cout;
  holder = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*holder) throw fb::ConfigError("cannot write '" + path + "'");
  return *holder;
}

int run_mode(const RunFlags& flags, fb::Mode mode) {
  json j = flags.config_file.empty() ? json::object() : fb::load_json_file(flags.config_file);
  j = fb::overlay(j, flags_to_patch(flags));
  j["mode"] = std::string(fb::mode_name(mode));
  const auto cfg = fb::parse_config_json(j);

  fb::FindTuner tuner;
  std::vector<fb::RunRow> rows;
  std::unique_ptr<std::ofstream> log_holder;
  std::ostream* log = nullptr;
  if (!cfg.event_log.empty()) log = &open_output(fb::resolve_output_path(cfg.event_log), log_holder);
  for (auto seed : cfg.seeds) {
    std::vector<fb::EventRecord> events;
    rows.push_back(fb::run_one(cfg, seed, tuner, log ? &events : nullptr));
    if (log) {
      if (cfg.seeds.size() > 1) *log << "# seed " << seed << '\n';
      fb::write_event_log(*log, events);
    }
  }
  std::unique_ptr<std::ofstream> out_holder;
  auto& out = open_output(fb::resolve_output_path(cfg.output), out_holder);
  fb::write_metrics(out, rows, cfg.format);
  out.flush();
  return 0;
}

int run_sweep_cmd(const std::string& file, const std::string& out_path, const std::string& summary_path,
                  const std::optional<std::string>& format, const std::optional<std::int64_t>& budget) {
  json j = fb::load_json_file(file);
  if (budget) j["budget"] = *budget;
  if (format) j["format"] = *format;
  std::int64_t used_budget = 0;
  const auto points = fb::expand_sweep(j, &used_budget);
  if (points.empty()) throw fb::ConfigError("sweep has no points");
  fb::FindTuner tuner;
  const auto result = fb::run_sweep(points, tuner);
  const auto fmt = points.front().format;
  const auto target = out_path.empty() ? points.front().output : out_path;
  std::unique_ptr<std::ofstream> out_holder;
  auto& out = open_output(fb::resolve_output_path(target), out_holder);
  fb::write_metrics(out, result.rows, fmt);
  out.flush();
  if (!summary_path.empty()) {
    std::unique_ptr<std::ofstream> sum_holder;
    auto& sum = open_output(fb::resolve_output_path(summary_path), sum_holder);
    fb::write_summary(sum, result.summary, fmt);
  } else {
    fb::write_summary(std::cerr, result.summary, fmt);
  }
  return 0;
}

int run_validate(const std::string& file, const std::optional<std::string>& pattern, const std::optional<int>& devices,
                 const std::optional<int>& elements, bool print) {
  fb::Schedule s;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw fb::ConfigError("cannot read schedule file '" + file + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw fb::ConfigError("schedule file '" + file + "': " + e.what());
    }
    s = fb::schedule_from_json(j);
  } else {
    if (!pattern || !devices) throw fb::ConfigError("give --file, or --pattern and --devices");
    const auto p = fb::parse_pattern(*pattern);
    if (p == fb::Pattern::Line) s = fb::build_line_schedule(*devices);
    else if (p == fb::Pattern::Tree) s = fb::build_tree_schedule(*devices);
    else if (p == fb::Pattern::Ring) s = fb::build_ring_schedule(*devices, elements.value_or(*devices));
    else s = fb::build_pair_schedule(*devices, fb::default_pairs(*devices));
  }
  if (print) std::cout << fb::schedule_to_json(s).dump(2) << '\n';
  const auto violations = fb::validate_schedule(s);
  json report = json::array();
  for (const auto& v : violations)
    report.push_back({{"code", v.code}, {"round", v.round_index}, {"device", v.device}, {"message", v.message}});
  std::cout << json{{"valid", violations.empty()}, {"violations", report}}.dump() << '\n';
  return violations.empty() ? 0 : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slotted simulator for beacon-assisted battery-free device scheduling"};
  app.require_subcommand(1);

  RunFlags discover_flags, pairwise_flags, aggregate_flags;
  auto* discover = app.add_subcommand("discover", "beacon (or baseline) discovery only");
  add_run_flags(discover, discover_flags, false, false);
  auto* pairwise = app.add_subcommand("pairwise", "discover, then run one exchange per pair and item");
  add_run_flags(pairwise, pairwise_flags, false, true);
  auto* aggregate = app.add_subcommand("aggregate", "discover, then aggregate with a line, tree or ring schedule");
  add_run_flags(aggregate, aggregate_flags, true, false);

  auto* sweep = app.add_subcommand("sweep", "run every combination of list-valued config keys");
  std::string sweep_file, sweep_out, sweep_summary;
  std::optional<std::string> sweep_format;
  std::optional<std::int64_t> sweep_budget;
  sweep->add_option("--config", sweep_file, "sweep JSON file")->required();
  sweep->add_option("--out", sweep_out, "per-run metrics file (default: config 'output' or stdout)");
  sweep->add_option("--summary", sweep_summary, "per-point summary file (default stderr)");
  sweep->add_option("--format", sweep_format, "csv | jsonl");
  sweep->add_option("--budget", sweep_budget, "maximum number of runs");

  auto* validate = app.add_subcommand("validate-schedule", "check a schedule for role conflicts");
  std::string schedule_file;
  std::optional<std::string> v_pattern;
  std::optional<int> v_devices, v_elements;
  bool v_print = false;
  validate->add_option("--file", schedule_file, "schedule JSON file");
  validate->add_option("--pattern", v_pattern, "line | tree | ring | pairs");
  validate->add_option("--devices", v_devices, "device count for --pattern");
  validate->add_option("--elements", v_elements, "ring elements");
  validate->add_flag("--print", v_print, "print the schedule as JSON first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*discover) return run_mode(discover_flags, fb::Mode::Discover);
    if (*pairwise) return run_mode(pairwise_flags, fb::Mode::Pairwise);
    if (*aggregate) return run_mode(aggregate_flags, fb::Mode::Aggregate);
    if (*sweep) return run_sweep_cmd(sweep_file, sweep_out, sweep_summary, sweep_format, sweep_budget);
    if (*validate) return run_validate(schedule_file, v_pattern, v_devices, v_elements, v_print);
  } catch (const fb::BudgetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBudget;
  } catch (const fb::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fb::TraceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kExitAborted;
  }
  return 0;
}
