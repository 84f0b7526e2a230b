#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pol/node_protocol.hpp"
#include "pol/radio_channel.hpp"
#include "pol/scenario.hpp"

namespace pol {

inline constexpr int kTraceVersion = 1;
/// Ticks after a movement that belong to the movement, not the static phase.
inline constexpr Tick kMovementWindow = 60;
inline constexpr Tick kAttackWindow = 120;

struct MessageCounts {
  std::uint64_t payload = 0;
  std::uint64_t bft = 0;
  std::uint64_t alert = 0;

  bool operator==(const MessageCounts&) const = default;
};

struct NodeCounts {
  MessageCounts sent;
  MessageCounts received;
};

struct BftEvent {
  Tick tick = 0;
  NodeId sender;
  NodeId subject;
  /// False for frames injected by an attack.
  bool honest = true;
};

struct AlertEvent {
  Tick tick = 0;
  NodeId sender;
  AlertType type = AlertType::kMeasurementAlert;
  std::optional<NodeId> object;
};

struct RssiRecord {
  Tick tick = 0;
  NodeId receiver;
  NodeId sender;
  double raw = 0.0;
  double smoothed = 0.0;
};

struct TrustRecord {
  Tick tick = 0;
  NodeId node;
  NodeId peer;
  double value = 0.0;
};

struct EventRecord {
  Tick tick = 0;
  NodeId node;
  std::string action;
  nlohmann::json details;
};

struct MovementLatency {
  int node = 0;
  Tick at = 0;
  /// Per observer: ticks from the movement to its first BFT about the node.
  std::map<NodeId, std::optional<Tick>> first_bft;
};

struct RunMetrics {
  std::map<NodeId, NodeCounts> counts;
  std::vector<BftEvent> bft_events;
  std::vector<AlertEvent> alert_events;
  std::vector<MovementLatency> latency;
  std::uint64_t static_phase_bft = 0;
  std::uint64_t static_phase_alerts = 0;
  std::vector<TrustRecord> trust_series;
  std::vector<RssiRecord> rssi;
  std::vector<EventRecord> events;
};

/// Discrete-time loop binding nodes to the channel. One call to step()
/// runs one tick: due movements and attacks, delivery of last tick's
/// transmissions, then every node's tick in ascending address order.
class Simulation {
 public:
  explicit Simulation(Scenario scenario);
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void step();
  void run_to_end();
  bool done() const { return now_ >= scenario_.duration; }
  Tick now() const { return now_; }

  const Scenario& scenario() const { return scenario_; }
  const NodeState& node(int id) const;
  NodeState& node(int id);
  const RadioChannel& channel() const { return channel_; }
  const RunMetrics& metrics() const { return metrics_; }
  /// Finalises latency and static-phase counts; valid once done().
  RunMetrics finish();

 private:
  struct Outgoing {
    NodeId radio;
    Bytes frame;
    bool honest = true;
  };
  struct ActiveAttack {
    std::size_t index;
    AttackSpec spec;
    NodeId radio;
    std::uint64_t next_seq = 1'000'000;
    std::vector<Bytes> captured;
  };

  void apply_schedule();
  void inject_attacks(std::vector<Outgoing>& out);
  void deliver(const std::vector<Outgoing>& frames);
  void count_sent(const NodeId& id, const Action& a);
  bool in_event_window(Tick t) const;
  Bytes sensor_value(const NodeSpec& n) const;

  Scenario scenario_;
  RadioChannel channel_;
  std::map<NodeId, NodeState> nodes_;
  std::map<int, NodeId> macs_;
  std::map<NodeId, const NodeSpec*> specs_;
  std::map<NodeId, std::vector<Reception>> inbox_;
  std::vector<Outgoing> pending_;
  std::vector<ActiveAttack> attacks_;
  Tick now_ = 0;
  RunMetrics metrics_;
};

/// Runs a scenario to completion.
RunMetrics run(const Scenario& scenario);

nlohmann::json metrics_to_json(const Scenario& scenario, const RunMetrics& m);

enum class TraceFormat { kCsv, kJsonl };

/// Writes rssi.csv (or rssi.jsonl), events.jsonl and metrics.json into dir.
void write_traces(const std::filesystem::path& dir, const Scenario& scenario, const RunMetrics& m,
                  TraceFormat format = TraceFormat::kCsv);

std::string format_rssi_csv(const RunMetrics& m);
std::string format_events_jsonl(const RunMetrics& m);

}  // namespace pol
