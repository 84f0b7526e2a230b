#pragma once

#include <string>
#include <vector>

#include "pol/scenario.hpp"
#include "pol/simulation.hpp"

namespace pol {

struct CriterionResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::string scenario;
  std::vector<CriterionResult> results;

  bool passed() const;
};

/// Runs the scenario and evaluates the expectations that follow from its
/// contents: bounded BFT emission after each movement, a quiet static
/// phase, detection of identity spoofing, resistance to fabricated BFTs,
/// and agreement between metrics and the event log.
CheckReport check_scenario(const Scenario& scenario);

/// Same, for a builtin by name.
CheckReport check_builtin(const std::string& name);

/// Sent-message counts reconstructed from the event log.
std::map<NodeId, MessageCounts> sent_counts_from_events(const std::vector<EventRecord>& events);

}  // namespace pol
