#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pol/core_model.hpp"
#include "pol/node_protocol.hpp"
#include "pol/radio_channel.hpp"
#include "pol/signal_filters.hpp"

namespace pol {

/// Raised for an invalid scenario; carries every violation found.
class ScenarioError : public Error {
 public:
  explicit ScenarioError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct NodeSpec {
  int id = 0;
  NodeId mac;
  Location position;
  SensorType sensor_type = SensorType::kTemperature;
  Tick payload_period = 1;
};

struct Movement {
  int node = 0;
  Tick at = 0;
  Location to;
  /// Sets the node's moved flag; the claimed location follows the move either way.
  bool announce = false;
};

enum class AttackType { kIdentitySpoof, kMaliciousBft, kReplay };

std::string_view to_string(AttackType t);
AttackType attack_type_from_string(std::string_view name);

struct AttackSpec {
  AttackType type = AttackType::kIdentitySpoof;
  Tick at = 0;
  int victim = 0;
  /// Compromised scenario node, MaliciousBft only.
  std::optional<int> attacker;
  /// Position of the attacker's radio, IdentitySpoof and Replay.
  std::optional<Location> position;
  Tick period = 1;
  /// IdentitySpoof: the victim stops transmitting once the attack starts.
  bool silence_victim = true;
  /// MaliciousBft: added to the attacker's own smoothed reading of the victim.
  double fabricated_offset = -20.0;
};

struct Scenario {
  std::string name = "custom";
  std::uint64_t seed = 1;
  Tick duration = 900;
  int tick_ms = 1000;
  std::vector<NodeSpec> nodes;
  std::vector<Movement> movements;
  std::vector<AttackSpec> attacks;
  ChannelConfig channel;
  FilterParams filter;
  ProtocolParams protocol;

  /// Throws ScenarioError listing all violations.
  void validate() const;
  const NodeSpec& node(int id) const;
};

/// Strict parse: unknown keys, wrong types and semantic violations are
/// collected and reported together.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
nlohmann::json to_json(const Scenario& s);

const std::vector<std::string>& builtin_names();
/// Throws ScenarioError for an unknown name.
Scenario builtin_scenario(const std::string& name);

/// Address of the radio used by an attack that brings its own hardware.
NodeId attacker_radio_id(std::size_t attack_index);

}  // namespace pol
