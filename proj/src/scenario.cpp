#include "pol/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pol {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out = "invalid scenario:";
  for (const auto& s : v) out += "\n  - " + s;
  return out;
}

Location location_from(const json& v) {
  if (!v.is_array() || v.size() != 3) throw InvalidLocation("expected [x, y, z]");
  return Location::make(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

json location_json(const Location& l) { return json::array({l.x, l.y, l.z}); }

/// Collects violations while walking a document.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void fail(const std::string& path, const std::string& what) {
    errors_.push_back(path + ": " + what);
  }

  bool object(const json& v, const std::string& path, std::initializer_list<std::string_view> keys) {
    if (!v.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [k, _] : v.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(path + "." + k, "unknown key");
    }
    return true;
  }

  // Runs `f` and turns any exception into a violation at `path`.
  template <typename F>
  void guard(const std::string& path, F&& f) {
    try {
      f();
    } catch (const json::exception& e) {
      fail(path, e.what());
    } catch (const std::exception& e) {
      fail(path, e.what());
    }
  }

  template <typename T>
  void field(const json& obj, const std::string& path, const char* key, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    guard(path + "." + key, [&] { out = it->template get<T>(); });
  }

  void location(const json& obj, const std::string& path, const char* key, Location& out,
                bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(path + "." + key, "missing");
      return;
    }
    guard(path + "." + key, [&] { out = location_from(*it); });
  }

  void require(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) fail(path + "." + key, "missing");
  }

 private:
  std::vector<std::string>& errors_;
};

NodeSpec parse_node(Reader& r, const json& v, const std::string& path) {
  NodeSpec n;
  if (!r.object(v, path, {"id", "mac", "position", "sensor_type", "payload_period"})) return n;
  r.require(v, path, "id");
  r.field(v, path, "id", n.id);
  n.mac = NodeId::from_index(static_cast<std::uint16_t>(n.id));
  if (v.contains("mac")) {
    r.guard(path + ".mac", [&] { n.mac = NodeId::parse(v.at("mac").get<std::string>()); });
  }
  r.location(v, path, "position", n.position, true);
  if (v.contains("sensor_type")) {
    r.guard(path + ".sensor_type",
            [&] { n.sensor_type = sensor_type_from_string(v.at("sensor_type").get<std::string>()); });
  }
  r.field(v, path, "payload_period", n.payload_period);
  return n;
}

Movement parse_movement(Reader& r, const json& v, const std::string& path) {
  Movement m;
  if (!r.object(v, path, {"node", "at", "to", "announce"})) return m;
  r.require(v, path, "node");
  r.require(v, path, "at");
  r.field(v, path, "node", m.node);
  r.field(v, path, "at", m.at);
  r.location(v, path, "to", m.to, true);
  r.field(v, path, "announce", m.announce);
  return m;
}

AttackSpec parse_attack(Reader& r, const json& v, const std::string& path) {
  AttackSpec a;
  if (!r.object(v, path, {"type", "at", "params"})) return a;
  r.require(v, path, "type");
  r.require(v, path, "at");
  if (v.contains("type")) {
    r.guard(path + ".type", [&] { a.type = attack_type_from_string(v.at("type").get<std::string>()); });
  }
  r.field(v, path, "at", a.at);
  if (a.type != AttackType::kMaliciousBft) a.period = 1;
  else a.period = 10;

  auto it = v.find("params");
  if (it == v.end()) {
    r.fail(path + ".params", "missing");
    return a;
  }
  const std::string pp = path + ".params";
  if (!r.object(*it, pp, {"victim", "attacker", "position", "period", "silence_victim",
                          "fabricated_offset"})) {
    return a;
  }
  const json& p = *it;
  r.require(p, pp, "victim");
  r.field(p, pp, "victim", a.victim);
  if (p.contains("attacker")) {
    int id = 0;
    r.field(p, pp, "attacker", id);
    a.attacker = id;
  }
  if (p.contains("position")) {
    Location l;
    r.location(p, pp, "position", l, true);
    a.position = l;
  }
  r.field(p, pp, "period", a.period);
  r.field(p, pp, "silence_victim", a.silence_victim);
  r.field(p, pp, "fabricated_offset", a.fabricated_offset);
  return a;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> violations)
    : Error(join(violations)), violations_(std::move(violations)) {}

std::string_view to_string(AttackType t) {
  switch (t) {
    case AttackType::kIdentitySpoof: return "identity_spoof";
    case AttackType::kMaliciousBft: return "malicious_bft";
    case AttackType::kReplay: return "replay";
  }
  return "unknown";
}

AttackType attack_type_from_string(std::string_view name) {
  for (auto t : {AttackType::kIdentitySpoof, AttackType::kMaliciousBft, AttackType::kReplay}) {
    if (to_string(t) == name) return t;
  }
  throw InvalidValue("unknown attack type '" + std::string(name) + "'");
}

NodeId attacker_radio_id(std::size_t attack_index) {
  return NodeId({0x06, 0x00, 0x00, 0x00, 0xa0, static_cast<std::uint8_t>(attack_index & 0xff)});
}

const NodeSpec& Scenario::node(int id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return n;
  }
  throw ScenarioError({"node " + std::to_string(id) + " does not exist"});
}

void Scenario::validate() const {
  std::vector<std::string> errors;
  auto check = [&errors](bool ok, std::string what) {
    if (!ok) errors.push_back(std::move(what));
  };

  check(duration > 0, "duration must be positive");
  check(tick_ms > 0, "tick_ms must be positive");
  check(!nodes.empty(), "at least one node is required");

  std::set<int> ids;
  std::set<NodeId> macs;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    std::string at = "nodes[" + std::to_string(i) + "]";
    check(ids.insert(n.id).second, at + ": duplicate id " + std::to_string(n.id));
    check(macs.insert(n.mac).second, at + ": duplicate mac " + n.mac.str());
    check(n.payload_period > 0, at + ": payload_period must be positive");
    check(n.position.finite(), at + ": position must be finite");
  }

  for (std::size_t i = 0; i < movements.size(); ++i) {
    const auto& m = movements[i];
    std::string at = "movements[" + std::to_string(i) + "]";
    check(ids.contains(m.node), at + ": unknown node " + std::to_string(m.node));
    check(m.at >= 0 && m.at < duration, at + ": time outside [0, duration)");
  }

  for (std::size_t i = 0; i < attacks.size(); ++i) {
    const auto& a = attacks[i];
    std::string at = "attacks[" + std::to_string(i) + "]";
    check(ids.contains(a.victim), at + ": unknown victim " + std::to_string(a.victim));
    check(a.at >= 0 && a.at < duration, at + ": time outside [0, duration)");
    check(a.period > 0, at + ": period must be positive");
    if (a.type == AttackType::kMaliciousBft) {
      check(a.attacker.has_value(), at + ": malicious_bft needs an attacker node");
      if (a.attacker) {
        check(ids.contains(*a.attacker), at + ": unknown attacker " + std::to_string(*a.attacker));
        check(*a.attacker != a.victim, at + ": attacker and victim must differ");
      }
    } else {
      check(a.position.has_value(), at + ": " + std::string(to_string(a.type)) +
                                        " needs an attacker position");
    }
  }

  auto config = [&](const char* what, auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      errors.push_back(std::string(what) + ": " + e.what());
    }
  };
  config("channel", [&] { channel.validate(); });
  config("filter", [&] { filter.validate(); });
  config("protocol", [&] { protocol.validate(); });

  if (!errors.empty()) throw ScenarioError(std::move(errors));
}

Scenario scenario_from_json(const json& doc) {
  std::vector<std::string> errors;
  Reader r(errors);
  Scenario s;
  if (!r.object(doc, "$", {"name", "seed", "duration", "tick_ms", "nodes", "movements", "attacks",
                           "channel", "filter", "protocol"})) {
    throw ScenarioError(std::move(errors));
  }
  r.field(doc, "$", "name", s.name);
  r.field(doc, "$", "seed", s.seed);
  r.field(doc, "$", "duration", s.duration);
  r.field(doc, "$", "tick_ms", s.tick_ms);

  auto list = [&](const char* key, auto&& parse) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    if (!it->is_array()) {
      r.fail(std::string("$.") + key, "expected an array");
      return;
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      parse((*it)[i], std::string("$.") + key + "[" + std::to_string(i) + "]");
    }
  };
  r.require(doc, "$", "nodes");
  list("nodes", [&](const json& v, const std::string& p) { s.nodes.push_back(parse_node(r, v, p)); });
  list("movements",
       [&](const json& v, const std::string& p) { s.movements.push_back(parse_movement(r, v, p)); });
  list("attacks",
       [&](const json& v, const std::string& p) { s.attacks.push_back(parse_attack(r, v, p)); });

  if (doc.contains("channel")) r.guard("$.channel", [&] { doc.at("channel").get_to(s.channel); });
  if (doc.contains("filter")) r.guard("$.filter", [&] { doc.at("filter").get_to(s.filter); });
  if (doc.contains("protocol")) r.guard("$.protocol", [&] { doc.at("protocol").get_to(s.protocol); });
  s.channel.seed = s.seed;

  try {
    s.validate();
  } catch (const ScenarioError& e) {
    for (const auto& v : e.violations()) errors.push_back(v);
  }
  if (!errors.empty()) throw ScenarioError(std::move(errors));
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({"cannot open scenario file " + path});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError({path + ": " + e.what()});
  }
  return scenario_from_json(doc);
}

json to_json(const Scenario& s) {
  json nodes = json::array();
  for (const auto& n : s.nodes) {
    nodes.push_back({{"id", n.id},
                     {"mac", n.mac.str()},
                     {"position", location_json(n.position)},
                     {"sensor_type", std::string(to_string(n.sensor_type))},
                     {"payload_period", n.payload_period}});
  }
  json movements = json::array();
  for (const auto& m : s.movements) {
    movements.push_back(
        {{"node", m.node}, {"at", m.at}, {"to", location_json(m.to)}, {"announce", m.announce}});
  }
  json attacks = json::array();
  for (const auto& a : s.attacks) {
    json p{{"victim", a.victim}, {"period", a.period}};
    if (a.attacker) p["attacker"] = *a.attacker;
    if (a.position) p["position"] = location_json(*a.position);
    if (a.type == AttackType::kIdentitySpoof) p["silence_victim"] = a.silence_victim;
    if (a.type == AttackType::kMaliciousBft) p["fabricated_offset"] = a.fabricated_offset;
    attacks.push_back({{"type", std::string(to_string(a.type))}, {"at", a.at}, {"params", p}});
  }
  return json{{"name", s.name},         {"seed", s.seed},       {"duration", s.duration},
              {"tick_ms", s.tick_ms},   {"nodes", nodes},       {"movements", movements},
              {"attacks", attacks},     {"channel", s.channel}, {"filter", s.filter},
              {"protocol", s.protocol}};
}

namespace {

Scenario five_node_layout(std::string name) {
  Scenario s;
  s.name = std::move(name);
  s.seed = 1;
  s.duration = 900;
  const std::array<Location, 5> positions{{{0, 0, -1}, {1, 0, 0}, {0, 1.5, 0}, {2, 1, 1}, {1, 2, 0}}};
  const std::array<SensorType, 5> sensors{SensorType::kTemperature, SensorType::kHumidity,
                                          SensorType::kTemperature, SensorType::kPressure,
                                          SensorType::kAcceleration};
  for (int i = 0; i < 5; ++i) {
    NodeSpec n;
    n.id = i + 1;
    n.mac = NodeId::from_index(static_cast<std::uint16_t>(i + 1));
    n.position = positions[static_cast<std::size_t>(i)];
    n.sensor_type = sensors[static_cast<std::size_t>(i)];
    s.nodes.push_back(n);
  }
  return s;
}

}  // namespace

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"paper-fig7", "static-honest", "spoof-attack",
                                              "malicious-bft"};
  return names;
}

Scenario builtin_scenario(const std::string& name) {
  if (name == "paper-fig7") {
    auto s = five_node_layout(name);
    s.movements.push_back({5, 300, {1, 6, 0}, false});
    s.movements.push_back({5, 600, {1, 2, 0}, false});
    return s;
  }
  if (name == "static-honest") return five_node_layout(name);
  if (name == "spoof-attack") {
    auto s = five_node_layout(name);
    AttackSpec a;
    a.type = AttackType::kIdentitySpoof;
    a.at = 400;
    a.victim = 1;
    a.position = Location{0, -5, -1};
    s.attacks.push_back(a);
    return s;
  }
  if (name == "malicious-bft") {
    auto s = five_node_layout(name);
    AttackSpec a;
    a.type = AttackType::kMaliciousBft;
    a.at = 300;
    a.victim = 1;
    a.attacker = 4;
    a.period = 10;
    s.attacks.push_back(a);
    return s;
  }
  throw ScenarioError({"unknown builtin scenario '" + name + "'"});
}

}  // namespace pol
