#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pol/core_model.hpp"

namespace pol {

class TraceError : public Error {
 public:
  using Error::Error;
};

struct TraceRow {
  Tick tick = 0;
  NodeId receiver;
  NodeId sender;
  double raw = 0.0;
  double smoothed = 0.0;
};

/// Parses an rssi.csv trace. Throws TraceError with the line number on
/// malformed input.
std::vector<TraceRow> read_rssi_csv(const std::filesystem::path& path);
std::vector<TraceRow> parse_rssi_csv(std::istream& in);

struct TraceEvent {
  NodeId node;
  Tick at = 0;
  Tick window = 0;
};

/// Movements (and attack starts) listed in a metrics.json document.
std::vector<TraceEvent> events_from_metrics(const nlohmann::json& metrics);

/// "LO:HI:STEP" inclusive of HI (within half a step). Throws ConfigError.
std::vector<double> parse_threshold_sweep(const std::string& spec);

struct SweepConfig {
  std::vector<std::string> filters;
  /// Smoother parameters plus optional "threshold", "cooldown", "warmup".
  nlohmann::json params = nlohmann::json::object();
  /// Empty means the single threshold from params (default 6).
  std::vector<double> thresholds;
  std::vector<TraceEvent> events;
};

struct DetectionStat {
  NodeId node;
  Tick at = 0;
  std::size_t links_total = 0;
  std::size_t links_detected = 0;
  std::optional<Tick> max_latency;
  std::optional<double> mean_latency;
};

struct SweepRow {
  std::string filter;
  double threshold = 0.0;
  std::uint64_t triggers = 0;
  std::uint64_t static_false_positives = 0;
  std::vector<DetectionStat> detections;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// Per filter, smoothed value for every trace row in input order.
  std::map<std::string, std::vector<double>> smoothed;
};

/// Replays the raw column per link through each filter and trigger.
/// Throws ConfigError for unknown filters or parameters.
SweepResult sweep_filters(const std::vector<TraceRow>& trace, const SweepConfig& config);

nlohmann::json sweep_report(const SweepConfig& config, const SweepResult& result);
std::string sweep_csv(const std::vector<TraceRow>& trace, const SweepConfig& config,
                      const SweepResult& result);

}  // namespace pol
