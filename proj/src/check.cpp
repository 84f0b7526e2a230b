#include "pol/check.hpp"

#include <set>
#include <sstream>

namespace pol {

bool CheckReport::passed() const {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

std::map<NodeId, MessageCounts> sent_counts_from_events(const std::vector<EventRecord>& events) {
  std::map<NodeId, MessageCounts> out;
  for (const auto& e : events) {
    if (e.action == "send_payload") ++out[e.node].payload;
    else if (e.action == "send_bft") ++out[e.node].bft;
    else if (e.action == "send_alert") ++out[e.node].alert;
  }
  return out;
}

namespace {

struct SpoofWatch {
  const AttackSpec* attack;
  bool distrusted = false;
};

struct BftWatch {
  const AttackSpec* attack;
  std::optional<Tick> first_distrust;
};

}  // namespace

CheckReport check_scenario(const Scenario& scenario) {
  CheckReport report;
  report.scenario = scenario.name;

  Simulation sim(scenario);
  std::vector<SpoofWatch> spoofs;
  std::vector<BftWatch> fabricated;
  for (const auto& a : scenario.attacks) {
    if (a.type == AttackType::kIdentitySpoof) spoofs.push_back({&a});
    if (a.type == AttackType::kMaliciousBft) fabricated.push_back({&a, std::nullopt});
  }

  auto honest_ids = [&](const AttackSpec& a) {
    std::vector<int> ids;
    for (const auto& n : scenario.nodes) {
      if (n.id != a.victim && (!a.attacker || n.id != *a.attacker)) ids.push_back(n.id);
    }
    return ids;
  };

  while (!sim.done()) {
    sim.step();
    Tick t = sim.now() - 1;
    for (auto& w : spoofs) {
      if (t <= w.attack->at || t > w.attack->at + kAttackWindow) continue;
      const NodeId& victim = scenario.node(w.attack->victim).mac;
      for (int id : honest_ids(*w.attack)) {
        if (distrust(sim.node(id), victim, t)) w.distrusted = true;
      }
    }
    for (auto& w : fabricated) {
      if (t <= w.attack->at || w.first_distrust) continue;
      const NodeId& victim = scenario.node(w.attack->victim).mac;
      for (int id : honest_ids(*w.attack)) {
        if (distrust(sim.node(id), victim, t)) w.first_distrust = t;
      }
    }
  }
  RunMetrics m = sim.finish();

  for (const auto& mv : scenario.movements) {
    const NodeId& subject = scenario.node(mv.node).mac;
    CriterionResult r{"movement-detection@" + std::to_string(mv.at), true, {}};
    std::ostringstream detail;
    for (const auto& n : scenario.nodes) {
      if (n.id == mv.node) continue;
      int count = 0;
      for (const auto& e : m.bft_events) {
        if (e.honest && e.sender == n.mac && e.subject == subject && e.tick > mv.at &&
            e.tick <= mv.at + kMovementWindow) {
          ++count;
        }
      }
      if (count < 1 || count > 2) r.pass = false;
      detail << "node" << n.id << "=" << count << " ";
    }
    r.detail = "BFTs about node " + std::to_string(mv.node) + " within " +
               std::to_string(kMovementWindow) + " ticks: " + detail.str();
    report.results.push_back(std::move(r));
  }

  report.results.push_back({"static-phase-quiet",
                            m.static_phase_bft == 0 && m.static_phase_alerts == 0,
                            "static-phase BFT=" + std::to_string(m.static_phase_bft) +
                                " alerts=" + std::to_string(m.static_phase_alerts)});

  if (scenario.movements.empty() && scenario.attacks.empty()) {
    report.results.push_back(
        {"no-dissent", m.bft_events.empty() && m.alert_events.empty(),
         "BFT=" + std::to_string(m.bft_events.size()) +
             " alerts=" + std::to_string(m.alert_events.size())});
  }

  for (const auto& w : spoofs) {
    const NodeId& victim = scenario.node(w.attack->victim).mac;
    std::set<NodeId> senders;
    for (const auto& e : m.bft_events) {
      if (e.honest && e.subject == victim && e.sender != victim && e.tick > w.attack->at &&
          e.tick <= w.attack->at + kAttackWindow) {
        senders.insert(e.sender);
      }
    }
    std::size_t tau = 0;
    for (int id : honest_ids(*w.attack)) tau = std::max(tau, current_tau(sim.node(id), sim.now()));
    if (scenario.protocol.tau) tau = *scenario.protocol.tau;
    report.results.push_back({"spoof-dissent@" + std::to_string(w.attack->at), senders.size() > tau,
                              std::to_string(senders.size()) + " honest senders, tau=" +
                                  std::to_string(tau)});
    report.results.push_back({"spoof-distrust@" + std::to_string(w.attack->at), w.distrusted,
                              w.distrusted ? "an honest node distrusts the spoofed identity"
                                           : "no honest node distrusts the spoofed identity"});
  }

  for (const auto& w : fabricated) {
    report.results.push_back(
        {"fabricated-bft-resisted@" + std::to_string(w.attack->at), !w.first_distrust,
         w.first_distrust ? "victim distrusted at tick " + std::to_string(*w.first_distrust)
                          : "victim never distrusted by an honest node"});
  }

  auto derived = sent_counts_from_events(m.events);
  bool consistent = true;
  for (const auto& [id, c] : m.counts) {
    auto it = derived.find(id);
    MessageCounts d = it == derived.end() ? MessageCounts{} : it->second;
    if (!(d == c.sent)) consistent = false;
  }
  report.results.push_back({"counts-match-trace", consistent,
                            consistent ? "metrics counts equal event-log counts"
                                       : "metrics counts differ from event-log counts"});
  return report;
}

CheckReport check_builtin(const std::string& name) { return check_scenario(builtin_scenario(name)); }

}  // namespace pol
