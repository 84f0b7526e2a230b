#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pol/core_model.hpp"
#include "pol/localization.hpp"
#include "pol/signal_filters.hpp"
#include "pol/topology_store.hpp"

namespace pol {

struct ProtocolParams {
  /// Trust below epsilon means distrust.
  double epsilon = 0.3;
  /// Fixed BFT-count limit. When unset the limit is
  /// max(1, ceil(tau_fraction * peers heard within bft_window)).
  std::optional<std::size_t> tau;
  double tau_fraction = 0.5;
  double trust_step = 0.1;
  double initial_trust = 1.0;
  /// Claimed-vs-measured and history consistency tolerance, dB.
  double consistency_tol = 5.0;
  Tick pool_ttl = 120;
  /// Window for counting BFT messages and for the freshness of reported RSSI.
  Tick bft_window = 60;
  /// Measured samples used as the historical reference.
  std::size_t history_window = 32;
  std::size_t history_capacity = kDefaultHistoryCapacity;
  double grid = kDefaultGrid;

  void validate() const;
};

void to_json(nlohmann::json& j, const ProtocolParams& p);
/// Strict: unknown keys are rejected.
void from_json(const nlohmann::json& j, ProtocolParams& p);

struct PoolEntry {
  PayloadMessage msg;
  Tick received_at = 0;
  Rssi measured_rssi;
  // Last grid cell this entry was checked against, and the result.
  std::optional<std::array<std::int64_t, 3>> checked_cell;
  bool checked_ok = false;
};

/// Payload messages awaiting location verification, grouped by sender in
/// arrival order.
class MessagePool {
 public:
  explicit MessagePool(Tick ttl) : ttl_(ttl) {}

  /// False for a (sender, seq) pair that is already pooled or was seen
  /// within the ttl.
  bool add(const PayloadMessage& msg, Tick now, Rssi rssi);
  bool seen(const NodeId& sender, std::uint64_t seq) const;
  /// Removes and returns entries older than the ttl.
  std::vector<PoolEntry> take_expired(Tick now);

  std::map<NodeId, std::deque<PoolEntry>>& by_sender() { return by_sender_; }
  const std::map<NodeId, std::deque<PoolEntry>>& by_sender() const { return by_sender_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  Tick ttl() const { return ttl_; }

 private:
  Tick ttl_;
  std::map<NodeId, std::deque<PoolEntry>> by_sender_;
  std::map<std::pair<NodeId, std::uint64_t>, Tick> seen_;
  std::set<std::pair<Tick, std::pair<NodeId, std::uint64_t>>> seen_order_;
};

struct SendPayload {
  PayloadMessage msg;
  bool operator==(const SendPayload&) const = default;
};
struct SendBft {
  BftMessage msg;
  bool operator==(const SendBft&) const = default;
};
struct SendAlert {
  AlertMessage msg;
  bool operator==(const SendAlert&) const = default;
};
struct StoreTrusted {
  PayloadMessage msg;
  bool operator==(const StoreTrusted&) const = default;
};
/// Informational: a trust score changed while handling an alert.
struct AdjustTrust {
  NodeId peer;
  double delta = 0.0;
  double value = 0.0;
  std::string cause;
  bool operator==(const AdjustTrust&) const = default;
};
struct Ignore {
  std::string reason;
  std::string detail;
  bool operator==(const Ignore&) const = default;
};

using Action = std::variant<SendPayload, SendBft, SendAlert, StoreTrusted, AdjustTrust, Ignore>;
using Actions = std::vector<Action>;

std::string_view action_name(const Action& a);
nlohmann::json action_details(const Action& a);

struct NodeConfig {
  NodeId id;
  Location location;
  SensorType sensor_type = SensorType::kTemperature;
  ProtocolParams protocol;
  FilterParams filter;
  PathLossModel model;
};

struct NodeState {
  explicit NodeState(const NodeConfig& config);

  NodeId self_id;
  Location self_location;
  SensorType sensor_type;
  ProtocolParams params;
  FilterParams filter;
  PathLossModel model;

  TopologyStore store;
  MessagePool pool;
  std::map<NodeId, LinkPipeline> links;

  bool moved_flag = false;
  std::optional<Tick> moved_at;
  std::uint64_t next_seq = 1;

  /// Senders whose link trigger fired and still await a BFT decision.
  std::set<NodeId> pending_trigger;
  /// Last BFT this node sent about each subject.
  std::map<NodeId, Tick> last_bft_sent;
  std::map<std::pair<AlertType, NodeId>, Tick> last_alert_sent;
  std::deque<PayloadMessage> trusted;

  std::optional<Rssi> smoothed(const NodeId& peer) const;
};

inline constexpr std::size_t kTrustedCapacity = 256;

/// One received frame and the RSSI it arrived with.
struct Reception {
  Bytes frame;
  Rssi rssi;
};

Reception reception(const Message& msg, Rssi rssi);

// Protocol steps. Each mutates the state it is given and returns
// the resulting actions.

Actions emit_payload(NodeState& s, const Bytes& sensor_value, Tick now);
Actions receive_payload(NodeState& s, const PayloadMessage& msg, Rssi rssi, Tick now);
Actions validate_pool(NodeState& s, Tick now);
Actions receive_bft(NodeState& s, const BftMessage& msg, Rssi rssi, Tick now);
Actions receive_alert(NodeState& s, const AlertMessage& alert, Rssi rssi, Tick now);
/// Decodes a frame and dispatches it. Malformed frames yield Ignore(decode-error).
Actions receive_frame(NodeState& s, const Bytes& frame, Rssi rssi, Tick now);

/// Announced self-movement: updates the claimed location and sets moved_flag.
void announce_move(NodeState& s, const Location& to, Tick now);

/// BFT-count limit currently in force.
std::size_t current_tau(const NodeState& s, Tick now);
std::size_t peers_in_range(const NodeState& s, Tick now);

/// theta: trust(target) < epsilon, or more than tau distinct peers sent a BFT
/// about target within the window.
bool distrust(const NodeState& s, const NodeId& target, Tick now);

enum class DefenseOutcome { kIgnore, kSendBft, kSelfDistrust, kDistrustAlert };

std::string_view to_string(DefenseOutcome o);

struct DefenseRow {
  bool claimed_consistent;   // c
  bool history_consistent;   // h
  bool distrust_sender;      // dB
  bool distrust_self;        // dSelf
  DefenseOutcome outcome;
};

/// Reaction of node A to BFT_BA, one row per predicate combination.
extern const std::array<DefenseRow, 16> kDefenseTable;

DefenseOutcome defense_decision(bool c, bool h, bool d_sender, bool d_self);

struct DefensePredicates {
  bool c = false;
  bool h = false;
  bool d_sender = false;
  bool d_self = false;
};

DefensePredicates defense_predicates(const NodeState& s, const BftMessage& msg, Tick now);

/// Handles a BFT message whose subject is this node.
Actions self_defense(NodeState& s, const BftMessage& msg, Tick now);

enum class AlertVerdict { kAccept, kReject, kIgnore };

std::string_view to_string(AlertVerdict v);

/// Classifies a distrust alert without changing state.
AlertVerdict judge_distrust_alert(const NodeState& s, const AlertMessage& alert, Tick now);

struct TickResult {
  NodeState state;
  Actions actions;
};

/// Inbox in arrival order, then pool validation, then optional emission.
Actions tick_in_place(NodeState& s, const std::vector<Reception>& inbox,
                      const std::optional<Bytes>& sensor_value, Tick now);

/// Pure form of tick_in_place.
TickResult tick(const NodeState& s, const std::vector<Reception>& inbox,
                const std::optional<Bytes>& sensor_value, Tick now);

/// Debug snapshot of the full node state.
nlohmann::json to_json(const NodeState& s);

}  // namespace pol
