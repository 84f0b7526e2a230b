#include "pol/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pol/filter_sweep.hpp"
#include "pol/scenario.hpp"
#include "pol/signal_filters.hpp"
#include "pol/simulation.hpp"

namespace pol::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunArgs {
  std::string scenario;
  std::string builtin;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
};

struct FilterArgs {
  std::string trace;
  std::string filters = "median_kalman";
  std::string params = "{}";
  std::string sweep;
  std::string metrics;
};

struct CheckArgs {
  std::string builtin;
  std::string scenario;
};

Scenario load(const std::string& path, const std::string& builtin) {
  if (!builtin.empty()) return builtin_scenario(builtin);
  return load_scenario(path);
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = load(a.scenario, a.builtin);
    if (a.seed) s.seed = *a.seed;
    s.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  RunMetrics m;
  try {
    m = run(s);
  } catch (const std::exception& e) {
    err << "error: simulation failed: " << e.what() << "\n";
    return kRuntime;
  }

  auto format = a.format == "jsonl" ? TraceFormat::kJsonl : TraceFormat::kCsv;
  try {
    write_traces(a.out, s, m, format);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }

  fs::path dir(a.out);
  out << "wrote " << (dir / (format == TraceFormat::kCsv ? "rssi.csv" : "rssi.jsonl")).string()
      << "\n";
  out << "wrote " << (dir / "events.jsonl").string() << "\n";
  out << "wrote " << (dir / "metrics.json").string() << "\n";
  out << "scenario=" << s.name << " seed=" << s.seed << " bft=" << m.bft_events.size()
      << " alerts=" << m.alert_events.size() << " static_phase_bft=" << m.static_phase_bft << "\n";
  return kOk;
}

int cmd_filters(const FilterArgs& a, std::ostream& out, std::ostream& err) {
  SweepConfig config;
  std::vector<TraceRow> trace;
  fs::path trace_path(a.trace);
  try {
    std::set<std::string> seen;
    std::string item;
    std::istringstream list(a.filters);
    while (std::getline(list, item, ',')) {
      if (item.empty()) continue;
      if (!seen.insert(item).second) throw ConfigError("filter '" + item + "' listed twice");
      config.filters.push_back(item);
    }
    if (config.filters.empty()) throw ConfigError("no filter given");
    try {
      config.params = json::parse(a.params);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("--params is not valid JSON: ") + e.what());
    }
    if (!a.sweep.empty()) config.thresholds = parse_threshold_sweep(a.sweep);
    trace = read_rssi_csv(trace_path);

    fs::path metrics = a.metrics.empty() ? trace_path.parent_path() / "metrics.json" : fs::path(a.metrics);
    if (fs::exists(metrics)) {
      std::ifstream in(metrics);
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw TraceError(metrics.string() + ": " + e.what());
      }
      config.events = events_from_metrics(doc);
    } else {
      err << "warning: " << metrics.string()
          << " not found; every trigger counts as a false positive\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  SweepResult result;
  try {
    result = sweep_filters(trace, config);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  fs::path dir = trace_path.parent_path();
  try {
    std::ofstream report(dir / "filter_report.json");
    report << sweep_report(config, result).dump(2) << "\n";
    std::ofstream csv(dir / "rssi_filtered.csv");
    csv << sweep_csv(trace, config, result);
    if (!report || !csv) throw std::runtime_error("cannot write reports into " + dir.string());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }

  for (const auto& r : result.rows) {
    out << "filter=" << r.filter << " threshold=" << r.threshold << " triggers=" << r.triggers
        << " static_false_positives=" << r.static_false_positives;
    for (const auto& d : r.detections) {
      out << " detected@" << d.at << "=" << d.links_detected << "/" << d.links_total;
      if (d.max_latency) out << " max_latency@" << d.at << "=" << *d.max_latency;
    }
    out << "\n";
  }
  out << "wrote " << (dir / "filter_report.json").string() << "\n";
  out << "wrote " << (dir / "rssi_filtered.csv").string() << "\n";
  return kOk;
}

int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = load(a.scenario, a.builtin);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  try {
    return report_check(check_scenario(s), out);
  } catch (const std::exception& e) {
    err << "error: check failed to run: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace

int report_check(const CheckReport& report, std::ostream& out) {
  for (const auto& r : report.results) {
    out << (r.pass ? "PASS " : "FAIL ") << report.scenario << " " << r.name << ": " << r.detail
        << "\n";
  }
  return report.passed() ? kOk : kCheckFailed;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Proof-of-Location protocol simulator", "pol"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a scenario and write trace files");
  auto* scen = run->add_option("--scenario", run_args.scenario, "Scenario JSON file");
  auto* built = run->add_option("--builtin", run_args.builtin, "Builtin scenario name")
                    ->check(CLI::IsMember(builtin_names()));
  scen->excludes(built);
  run->add_option("--out", run_args.out, "Output directory")->required();
  run->add_option("--seed", run_args.seed, "Override the scenario seed");
  run->add_option("--format", run_args.format, "RSSI trace format")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  FilterArgs filter_args;
  auto* filters = app.add_subcommand("filters", "Replay a recorded RSSI trace through filters");
  filters->add_option("--trace", filter_args.trace, "rssi.csv written by `run`")->required();
  filters->add_option("--filter", filter_args.filters,
                      "Comma-separated filter names (raw, moving_average, exp_smoothing, "
                      "dynamic_moving_average, gaussian, median, kalman, median_kalman)");
  filters->add_option("--params", filter_args.params,
                      "JSON object of filter parameters, threshold, cooldown, warmup");
  filters->add_option("--threshold-sweep", filter_args.sweep, "Thresholds as LO:HI:STEP");
  filters->add_option("--metrics", filter_args.metrics,
                      "metrics.json with movement times (default: next to the trace)");

  CheckArgs check_args;
  auto* check = app.add_subcommand("check", "Run a scenario and assert its expectations");
  auto* cscen = check->add_option("--scenario", check_args.scenario, "Scenario JSON file");
  auto* cbuilt = check->add_option("--builtin", check_args.builtin, "Builtin scenario name")
                     ->check(CLI::IsMember(builtin_names()));
  cscen->excludes(cbuilt);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (run->parsed() && run_args.scenario.empty() && run_args.builtin.empty()) {
      throw CLI::RequiredError("--scenario or --builtin");
    }
    if (check->parsed() && check_args.scenario.empty() && check_args.builtin.empty()) {
      throw CLI::RequiredError("--scenario or --builtin");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    }
    return kValidation;
  }

  if (run->parsed()) return cmd_run(run_args, out, err);
  if (filters->parsed()) return cmd_filters(filter_args, out, err);
  return cmd_check(check_args, out, err);
}

}  // namespace pol::cli
