#include "pol/simulation.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace pol {

using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::optional<NodeId> frame_sender(const Bytes& frame) {
  try {
    return sender_of(decode(frame));
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

void count(MessageCounts& c, std::uint8_t tag) {
  if (tag == kTagPayload) ++c.payload;
  else if (tag == kTagBft) ++c.bft;
  else if (tag == kTagAlert) ++c.alert;
}

}  // namespace

Simulation::Simulation(Scenario scenario)
    : scenario_(std::move(scenario)),
      channel_([this] {
        scenario_.validate();
        auto c = scenario_.channel;
        c.seed = scenario_.seed;
        return c;
      }()) {
  for (const auto& n : scenario_.nodes) {
    NodeConfig config{n.mac, n.position, n.sensor_type, scenario_.protocol, scenario_.filter,
                      scenario_.channel.model};
    nodes_.emplace(n.mac, NodeState(config));
    macs_[n.id] = n.mac;
    specs_[n.mac] = &n;
    channel_.add(n.mac, n.position);
    metrics_.counts[n.mac] = {};
  }
}

const NodeState& Simulation::node(int id) const { return nodes_.at(macs_.at(id)); }
NodeState& Simulation::node(int id) { return nodes_.at(macs_.at(id)); }

Bytes Simulation::sensor_value(const NodeSpec& n) const {
  auto v = mix(scenario_.seed ^ mix(static_cast<std::uint64_t>(n.id) ^ mix(static_cast<std::uint64_t>(now_))));
  return {static_cast<std::uint8_t>(v & 0xff), static_cast<std::uint8_t>((v >> 8) & 0xff)};
}

void Simulation::apply_schedule() {
  for (const auto& m : scenario_.movements) {
    if (m.at != now_) continue;
    const NodeId& id = macs_.at(m.node);
    channel_.move(id, m.to);
    auto& state = nodes_.at(id);
    if (m.announce) {
      announce_move(state, m.to, now_);
    } else {
      state.self_location = m.to;
    }
    metrics_.events.push_back({now_, id, "move",
                               {{"to", {m.to.x, m.to.y, m.to.z}}, {"announce", m.announce}}});
  }

  for (std::size_t i = 0; i < scenario_.attacks.size(); ++i) {
    const auto& a = scenario_.attacks[i];
    if (a.at != now_) continue;
    ActiveAttack active{i, a, {}, 1'000'000, {}};
    const NodeId& victim = macs_.at(a.victim);
    if (a.type == AttackType::kMaliciousBft) {
      active.radio = macs_.at(*a.attacker);
    } else {
      active.radio = attacker_radio_id(i);
      channel_.add(active.radio, *a.position);
      if (a.type == AttackType::kIdentitySpoof && a.silence_victim) channel_.set_muted(victim, true);
    }
    metrics_.events.push_back({now_, active.radio, "attack_start",
                               {{"type", std::string(to_string(a.type))}, {"victim", victim.str()}}});
    attacks_.push_back(std::move(active));
  }
}

void Simulation::inject_attacks(std::vector<Outgoing>& out) {
  for (auto& a : attacks_) {
    if ((now_ - a.spec.at) % a.spec.period != 0) continue;
    const NodeId& victim = macs_.at(a.spec.victim);
    const auto& victim_state = nodes_.at(victim);

    switch (a.spec.type) {
      case AttackType::kIdentitySpoof: {
        // The attacker knows the victim's claimed location and signs with it.
        PayloadMessage msg;
        msg.sender = victim;
        msg.seq = a.next_seq++;
        msg.sensor_type = victim_state.sensor_type;
        msg.payload = sensor_value(*specs_.at(victim));
        msg.signed_payload =
            location_key(victim_state.self_location, msg.payload, scenario_.protocol.grid);
        msg.timestamp = now_;
        out.push_back({a.radio, encode(msg), false});
        metrics_.events.push_back({now_, a.radio, "inject", {{"type", "payload"}, {"seq", msg.seq}}});
        break;
      }
      case AttackType::kMaliciousBft: {
        const auto& attacker = nodes_.at(a.radio);
        auto own = attacker.smoothed(victim);
        if (!own) break;
        BftMessage bft;
        bft.sender = a.radio;
        bft.sender_location = attacker.self_location;
        bft.subject = victim;
        bft.measured_rssi = Rssi::clamped(own->db() + a.spec.fabricated_offset);
        bft.timestamp = now_;
        out.push_back({a.radio, encode(bft), false});
        metrics_.bft_events.push_back({now_, a.radio, victim, false});
        metrics_.events.push_back({now_, a.radio, "inject",
                                   {{"type", "bft"},
                                    {"subject", victim.str()},
                                    {"measured_rssi", bft.measured_rssi.db()}}});
        break;
      }
      case AttackType::kReplay: {
        if (a.captured.empty()) break;
        Bytes frame = std::move(a.captured.front());
        a.captured.erase(a.captured.begin());
        out.push_back({a.radio, std::move(frame), false});
        metrics_.events.push_back({now_, a.radio, "inject", {{"type", "replay"}}});
        break;
      }
    }
  }
}

void Simulation::deliver(const std::vector<Outgoing>& frames) {
  for (const auto& f : frames) {
    for (const auto& d : channel_.broadcast(f.radio)) {
      if (nodes_.contains(d.to)) {
        inbox_[d.to].push_back({f.frame, d.rssi});
        count(metrics_.counts[d.to].received, f.frame.empty() ? 0 : f.frame[0]);
        continue;
      }
      for (auto& a : attacks_) {
        if (a.radio != d.to || a.spec.type != AttackType::kReplay) continue;
        if (f.frame.empty() || f.frame[0] != kTagPayload) continue;
        if (frame_sender(f.frame) == macs_.at(a.spec.victim)) a.captured.push_back(f.frame);
      }
    }
  }
}

void Simulation::count_sent(const NodeId& id, const Action& a) {
  auto& c = metrics_.counts[id].sent;
  if (std::holds_alternative<SendPayload>(a)) ++c.payload;
  else if (std::holds_alternative<SendBft>(a)) ++c.bft;
  else if (std::holds_alternative<SendAlert>(a)) ++c.alert;
}

void Simulation::step() {
  if (done()) return;
  apply_schedule();

  std::vector<Outgoing> frames = std::move(pending_);
  pending_.clear();
  inject_attacks(frames);
  deliver(frames);

  for (auto& [id, state] : nodes_) {
    const NodeSpec& spec = *specs_.at(id);
    std::optional<Bytes> value;
    if (now_ % spec.payload_period == 0) value = sensor_value(spec);

    auto inbox = std::move(inbox_[id]);
    inbox_[id].clear();
    auto actions = tick_in_place(state, inbox, value, now_);

    std::set<NodeId> logged;
    for (const auto& r : inbox) {
      auto sender = frame_sender(r.frame);
      if (!sender || *sender == id || !logged.insert(*sender).second) continue;
      auto smoothed = state.smoothed(*sender);
      if (!smoothed) continue;
      metrics_.rssi.push_back({now_, id, *sender, r.rssi.db(), smoothed->db()});
    }

    for (const auto& a : actions) {
      metrics_.events.push_back({now_, id, std::string(action_name(a)), action_details(a)});
      count_sent(id, a);
      if (const auto* p = std::get_if<SendPayload>(&a)) {
        pending_.push_back({id, encode(p->msg), true});
      } else if (const auto* b = std::get_if<SendBft>(&a)) {
        pending_.push_back({id, encode(b->msg), true});
        metrics_.bft_events.push_back({now_, id, b->msg.subject, true});
      } else if (const auto* s = std::get_if<SendAlert>(&a)) {
        pending_.push_back({id, encode(s->msg), true});
        const auto* object = std::get_if<NodeId>(&s->msg.object);
        metrics_.alert_events.push_back(
            {now_, id, s->msg.alert_type, object ? std::optional(*object) : std::nullopt});
      } else if (const auto* t = std::get_if<AdjustTrust>(&a)) {
        metrics_.trust_series.push_back({now_, id, t->peer, t->value});
      }
    }
  }
  ++now_;
}

void Simulation::run_to_end() {
  while (!done()) step();
}

bool Simulation::in_event_window(Tick t) const {
  for (const auto& m : scenario_.movements) {
    if (t > m.at && t <= m.at + kMovementWindow) return true;
  }
  for (const auto& a : scenario_.attacks) {
    if (t > a.at && t <= a.at + kAttackWindow) return true;
  }
  return false;
}

RunMetrics Simulation::finish() {
  RunMetrics m = metrics_;
  m.static_phase_bft = 0;
  m.static_phase_alerts = 0;
  for (const auto& e : m.bft_events) {
    if (e.honest && !in_event_window(e.tick)) ++m.static_phase_bft;
  }
  for (const auto& e : m.alert_events) {
    if (!in_event_window(e.tick)) ++m.static_phase_alerts;
  }

  m.latency.clear();
  for (const auto& mv : scenario_.movements) {
    MovementLatency lat{mv.node, mv.at, {}};
    Tick until = scenario_.duration;
    for (const auto& other : scenario_.movements) {
      if (other.node == mv.node && other.at > mv.at) until = std::min(until, other.at);
    }
    const NodeId& subject = macs_.at(mv.node);
    for (const auto& [id, _] : nodes_) {
      if (id == subject) continue;
      std::optional<Tick> first;
      for (const auto& e : m.bft_events) {
        if (e.honest && e.sender == id && e.subject == subject && e.tick > mv.at &&
            e.tick <= until) {
          first = e.tick - mv.at;
          break;
        }
      }
      lat.first_bft[id] = first;
    }
    m.latency.push_back(std::move(lat));
  }
  return m;
}

RunMetrics run(const Scenario& scenario) {
  Simulation sim(scenario);
  sim.run_to_end();
  return sim.finish();
}

json metrics_to_json(const Scenario& s, const RunMetrics& m) {
  auto counts_json = [](const MessageCounts& c) {
    return json{{"payload", c.payload}, {"bft", c.bft}, {"alert", c.alert}};
  };
  json counts = json::object();
  for (const auto& [id, c] : m.counts) {
    counts[id.str()] = {{"sent", counts_json(c.sent)}, {"received", counts_json(c.received)}};
  }
  json bfts = json::array();
  for (const auto& e : m.bft_events) {
    bfts.push_back({{"tick", e.tick},
                    {"sender", e.sender.str()},
                    {"subject", e.subject.str()},
                    {"honest", e.honest}});
  }
  json alerts = json::array();
  for (const auto& e : m.alert_events) {
    json a{{"tick", e.tick}, {"sender", e.sender.str()}, {"type", std::string(to_string(e.type))}};
    if (e.object) a["object"] = e.object->str();
    alerts.push_back(std::move(a));
  }
  json movements = json::array();
  for (const auto& mv : s.movements) {
    movements.push_back({{"node", s.node(mv.node).mac.str()},
                         {"id", mv.node},
                         {"at", mv.at},
                         {"to", {mv.to.x, mv.to.y, mv.to.z}},
                         {"announce", mv.announce}});
  }
  json attacks = json::array();
  for (const auto& a : s.attacks) {
    attacks.push_back({{"type", std::string(to_string(a.type))},
                       {"at", a.at},
                       {"victim", s.node(a.victim).mac.str()}});
  }
  json latency = json::array();
  for (const auto& l : m.latency) {
    json per = json::object();
    for (const auto& [id, t] : l.first_bft) per[id.str()] = t ? json(*t) : json(nullptr);
    latency.push_back({{"node", s.node(l.node).mac.str()}, {"at", l.at}, {"first_bft", per}});
  }
  json trust = json::array();
  for (const auto& t : m.trust_series) {
    trust.push_back(
        {{"tick", t.tick}, {"node", t.node.str()}, {"peer", t.peer.str()}, {"value", t.value}});
  }
  return json{{"trace_version", kTraceVersion},
              {"scenario", s.name},
              {"seed", s.seed},
              {"duration", s.duration},
              {"tick_ms", s.tick_ms},
              {"movements", movements},
              {"attacks", attacks},
              {"counts", counts},
              {"bft_events", bfts},
              {"alert_events", alerts},
              {"latency", latency},
              {"static_phase_bft", m.static_phase_bft},
              {"static_phase_alerts", m.static_phase_alerts},
              {"trust_series", trust}};
}

std::string format_rssi_csv(const RunMetrics& m) {
  std::string out = "tick,receiver,sender,rssi_raw,rssi_smoothed\n";
  char buf[160];
  for (const auto& r : m.rssi) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%s,%.4f,%.4f\n", static_cast<long long>(r.tick),
                  r.receiver.str().c_str(), r.sender.str().c_str(), r.raw, r.smoothed);
    out += buf;
  }
  return out;
}

namespace {

std::string format_rssi_jsonl(const RunMetrics& m) {
  std::string out;
  for (const auto& r : m.rssi) {
    out += json{{"tick", r.tick},
                {"receiver", r.receiver.str()},
                {"sender", r.sender.str()},
                {"rssi_raw", r.raw},
                {"rssi_smoothed", r.smoothed}}
               .dump();
    out += '\n';
  }
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace

std::string format_events_jsonl(const RunMetrics& m) {
  std::string out;
  for (const auto& e : m.events) {
    out += json{{"tick", e.tick}, {"node", e.node.str()}, {"action", e.action}, {"details", e.details}}
               .dump();
    out += '\n';
  }
  return out;
}

void write_traces(const std::filesystem::path& dir, const Scenario& scenario, const RunMetrics& m,
                  TraceFormat format) {
  std::filesystem::create_directories(dir);
  if (format == TraceFormat::kCsv) {
    write_file(dir / "rssi.csv", format_rssi_csv(m));
  } else {
    write_file(dir / "rssi.jsonl", format_rssi_jsonl(m));
  }
  write_file(dir / "events.jsonl", format_events_jsonl(m));
  write_file(dir / "metrics.json", metrics_to_json(scenario, m).dump(2) + "\n");
}

}  // namespace pol
