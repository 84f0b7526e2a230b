#include "pol/node_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pol {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Parameters

void ProtocolParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must be in (0, 1)");
  if (tau && *tau == 0) throw ConfigError("tau must be positive");
  if (!(tau_fraction > 0.0)) throw ConfigError("tau_fraction must be positive");
  if (!(trust_step > 0.0)) throw ConfigError("trust_step must be positive");
  if (!(initial_trust >= 0.0 && initial_trust <= 1.0)) {
    throw ConfigError("initial_trust must be in [0, 1]");
  }
  if (!(consistency_tol > 0.0)) throw ConfigError("consistency_tol must be positive");
  if (pool_ttl <= 0) throw ConfigError("pool_ttl must be positive");
  if (bft_window <= 0) throw ConfigError("bft_window must be positive");
  if (history_window == 0) throw ConfigError("history_window must be positive");
  if (history_capacity == 0) throw ConfigError("history_capacity must be positive");
  if (!(grid > 0.0)) throw ConfigError("grid must be positive");
}

void to_json(json& j, const ProtocolParams& p) {
  j = json{{"epsilon", p.epsilon},
           {"tau", p.tau ? json(*p.tau) : json(nullptr)},
           {"tau_fraction", p.tau_fraction},
           {"trust_step", p.trust_step},
           {"initial_trust", p.initial_trust},
           {"consistency_tol", p.consistency_tol},
           {"pool_ttl", p.pool_ttl},
           {"bft_window", p.bft_window},
           {"history_window", p.history_window},
           {"history_capacity", p.history_capacity},
           {"grid", p.grid}};
}

void from_json(const json& j, ProtocolParams& p) {
  for (const auto& [key, v] : j.items()) {
    if (key == "epsilon") p.epsilon = v.get<double>();
    else if (key == "tau") p.tau = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
    else if (key == "tau_fraction") p.tau_fraction = v.get<double>();
    else if (key == "trust_step") p.trust_step = v.get<double>();
    else if (key == "initial_trust") p.initial_trust = v.get<double>();
    else if (key == "consistency_tol") p.consistency_tol = v.get<double>();
    else if (key == "pool_ttl") p.pool_ttl = v.get<Tick>();
    else if (key == "bft_window") p.bft_window = v.get<Tick>();
    else if (key == "history_window") p.history_window = v.get<std::size_t>();
    else if (key == "history_capacity") p.history_capacity = v.get<std::size_t>();
    else if (key == "grid") p.grid = v.get<double>();
    else throw ConfigError("unknown protocol key '" + key + "'");
  }
}

// ---------------------------------------------------------------------------
// Message pool

bool MessagePool::add(const PayloadMessage& msg, Tick now, Rssi rssi) {
  while (!seen_order_.empty() && now - seen_order_.begin()->first > ttl_) {
    seen_.erase(seen_order_.begin()->second);
    seen_order_.erase(seen_order_.begin());
  }
  auto key = std::make_pair(msg.sender, msg.seq);
  if (!seen_.emplace(key, msg.timestamp).second) return false;
  seen_order_.emplace(msg.timestamp, key);
  by_sender_[msg.sender].push_back({msg, now, rssi, std::nullopt, false});
  return true;
}

bool MessagePool::seen(const NodeId& sender, std::uint64_t seq) const {
  return seen_.contains({sender, seq});
}

std::vector<PoolEntry> MessagePool::take_expired(Tick now) {
  std::vector<PoolEntry> expired;
  for (auto it = by_sender_.begin(); it != by_sender_.end();) {
    auto& q = it->second;
    while (!q.empty() && now - q.front().received_at > ttl_) {
      expired.push_back(std::move(q.front()));
      q.pop_front();
    }
    it = q.empty() ? by_sender_.erase(it) : std::next(it);
  }
  return expired;
}

std::size_t MessagePool::size() const {
  std::size_t n = 0;
  for (const auto& [_, q] : by_sender_) n += q.size();
  return n;
}

// ---------------------------------------------------------------------------
// Actions

std::string_view action_name(const Action& a) {
  struct {
    std::string_view operator()(const SendPayload&) const { return "send_payload"; }
    std::string_view operator()(const SendBft&) const { return "send_bft"; }
    std::string_view operator()(const SendAlert&) const { return "send_alert"; }
    std::string_view operator()(const StoreTrusted&) const { return "store_trusted"; }
    std::string_view operator()(const AdjustTrust&) const { return "adjust_trust"; }
    std::string_view operator()(const Ignore&) const { return "ignore"; }
  } visitor;
  return std::visit(visitor, a);
}

json action_details(const Action& a) {
  struct {
    json operator()(const SendPayload& p) const {
      return {{"seq", p.msg.seq}, {"key", p.msg.signed_payload.hex()}};
    }
    json operator()(const SendBft& b) const {
      json j{{"subject", b.msg.subject.str()}, {"measured_rssi", b.msg.measured_rssi.db()}};
      if (b.msg.ref_seq) j["ref_seq"] = *b.msg.ref_seq;
      return j;
    }
    json operator()(const SendAlert& s) const {
      json j{{"type", std::string(to_string(s.msg.alert_type))}};
      if (const auto* id = std::get_if<NodeId>(&s.msg.object)) j["object"] = id->str();
      if (s.msg.ref_bft) {
        j["ref_bft"] = {{"sender", s.msg.ref_bft->sender.str()},
                        {"subject", s.msg.ref_bft->subject.str()},
                        {"t", s.msg.ref_bft->timestamp}};
      }
      return j;
    }
    json operator()(const StoreTrusted& t) const {
      return {{"sender", t.msg.sender.str()}, {"seq", t.msg.seq}};
    }
    json operator()(const AdjustTrust& t) const {
      return {{"peer", t.peer.str()}, {"delta", t.delta}, {"value", t.value}, {"cause", t.cause}};
    }
    json operator()(const Ignore& i) const {
      json j{{"reason", i.reason}};
      if (!i.detail.empty()) j["detail"] = i.detail;
      return j;
    }
  } visitor;
  return std::visit(visitor, a);
}

// ---------------------------------------------------------------------------
// Node state

NodeState::NodeState(const NodeConfig& c)
    : self_id(c.id),
      self_location(Location::make(c.location.x, c.location.y, c.location.z)),
      sensor_type(c.sensor_type),
      params(c.protocol),
      filter(c.filter),
      model(c.model),
      store(c.protocol.history_capacity, c.protocol.initial_trust),
      pool(c.protocol.pool_ttl) {
  params.validate();
  filter.validate();
  model.validate();
}

std::optional<Rssi> NodeState::smoothed(const NodeId& peer) const {
  auto it = links.find(peer);
  if (it == links.end()) return std::nullopt;
  return it->second.smoothed();
}

Reception reception(const Message& msg, Rssi rssi) { return {encode(msg), rssi}; }

namespace {

/// Records a measurement of `peer` and feeds its link pipeline. At most one
/// measurement per link and tick is used.
void observe_sender(NodeState& s, const NodeId& peer, Rssi rssi, Tick now) {
  s.store.upsert_peer(peer);
  LinkKey link{s.self_id, peer};
  auto last = s.store.latest_sample(link, RssiSource::kMeasured);
  if (last && last->t >= now) return;
  s.store.record_rssi(link, now, rssi, RssiSource::kMeasured);
  auto it = s.links.try_emplace(peer, s.filter).first;
  if (it->second.push(rssi, now).fired) s.pending_trigger.insert(peer);
}

void record_reported(NodeState& s, const NodeId& observer, const NodeId& observed, Rssi v,
                     Tick now) {
  if (observer == observed) return;
  LinkKey link{observer, observed};
  auto last = s.store.latest_sample(link, RssiSource::kReported);
  if (last && last->t >= now) return;
  s.store.record_rssi(link, now, v, RssiSource::kReported);
}

/// Builds a BFT about `subject` if the cooldown allows it.
std::optional<BftMessage> make_bft(NodeState& s, const NodeId& subject,
                                   std::optional<std::uint64_t> ref_seq, Tick now) {
  auto measured = s.smoothed(subject);
  if (!measured) return std::nullopt;
  auto last = s.last_bft_sent.find(subject);
  if (last != s.last_bft_sent.end() && now - last->second < s.filter.cooldown) return std::nullopt;
  s.last_bft_sent[subject] = now;

  BftMessage bft;
  bft.sender = s.self_id;
  bft.sender_location = s.self_location;
  bft.subject = subject;
  bft.measured_rssi = *measured;
  bft.ref_seq = ref_seq;
  bft.timestamp = now;
  return bft;
}

std::optional<AlertMessage> make_alert(NodeState& s, AlertType type, const NodeId& object,
                                       std::optional<BftRef> ref, Tick now) {
  auto key = std::make_pair(type, object);
  auto last = s.last_alert_sent.find(key);
  if (last != s.last_alert_sent.end() && now - last->second < s.filter.cooldown) {
    return std::nullopt;
  }
  s.last_alert_sent[key] = now;
  AlertMessage alert;
  alert.sender = s.self_id;
  alert.alert_type = type;
  alert.object = object;
  alert.ref_bft = ref;
  alert.timestamp = now;
  return alert;
}

std::string flags(const DefensePredicates& p) {
  std::ostringstream os;
  os << "c=" << p.c << " h=" << p.h << " dB=" << p.d_sender << " dSelf=" << p.d_self;
  return os.str();
}

enum class Evidence { kConfirmed, kDoubted, kUnknown };

/// Local evidence about a peer's identity: confirmed when our smoothed RSSI
/// agrees with history and we hold no distrust, doubted when both disagree.
Evidence identity_evidence(const NodeState& s, const NodeId& peer, Tick now) {
  auto own = s.smoothed(peer);
  if (!own) return Evidence::kUnknown;
  bool h = s.store.history_consistent({s.self_id, peer}, *own, s.params.history_window,
                                      s.params.consistency_tol);
  bool theta = distrust(s, peer, now);
  if (h && !theta) return Evidence::kConfirmed;
  if (!h && theta) return Evidence::kDoubted;
  return Evidence::kUnknown;
}

void adjust(NodeState& s, Actions& out, const NodeId& peer, double delta, const char* cause) {
  if (peer == s.self_id) return;
  s.store.upsert_peer(peer);
  double before = s.store.trust_of(peer).value();
  double after = s.store.adjust_trust(peer, delta).value();
  out.push_back(AdjustTrust{peer, after - before, after, cause});
}

}  // namespace

// ---------------------------------------------------------------------------
// Emission

Actions emit_payload(NodeState& s, const Bytes& sensor_value, Tick now) {
  PayloadMessage msg;
  msg.sender = s.self_id;
  msg.seq = s.next_seq++;
  msg.sensor_type = s.sensor_type;
  msg.payload = sensor_value;
  msg.signed_payload = location_key(s.self_location, msg.payload, s.params.grid);
  msg.timestamp = now;
  return {SendPayload{std::move(msg)}};
}

void announce_move(NodeState& s, const Location& to, Tick now) {
  s.self_location = Location::make(to.x, to.y, to.z);
  s.moved_flag = true;
  s.moved_at = now;
}

// ---------------------------------------------------------------------------
// Reception into the pool

Actions receive_payload(NodeState& s, const PayloadMessage& msg, Rssi rssi, Tick now) {
  if (msg.sender == s.self_id) return {Ignore{"own-identity", msg.sender.str()}};
  observe_sender(s, msg.sender, rssi, now);
  if (auto* rec = s.store.peer(msg.sender)) rec->sensor_type = msg.sensor_type;

  if (now - msg.timestamp > s.params.pool_ttl) {
    return {Ignore{"stale", msg.sender.str() + "#" + std::to_string(msg.seq)}};
  }
  if (!s.pool.add(msg, now, rssi)) {
    return {Ignore{"duplicate", msg.sender.str() + "#" + std::to_string(msg.seq)}};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Validation

Actions validate_pool(NodeState& s, Tick now) {
  Actions out;
  for (auto& e : s.pool.take_expired(now)) {
    out.push_back(Ignore{"expired", e.msg.sender.str() + "#" + std::to_string(e.msg.seq)});
  }

  for (auto& [sender, queue] : s.pool.by_sender()) {
    AnchorQuery query{s.self_id, s.self_location, s.smoothed(sender), now, s.params.bft_window};
    auto anchors = gather_anchors(sender, s.store, query);
    bool triggered = s.pending_trigger.contains(sender);
    std::uint64_t newest_seq = queue.back().msg.seq;

    if (anchors.size() < 3) {
      if (triggered) {
        s.pending_trigger.erase(sender);
        if (auto bft = make_bft(s, sender, newest_seq, now)) {
          out.push_back(SendBft{std::move(*bft)});
        } else {
          out.push_back(Ignore{"bft-cooldown", sender.str()});
        }
      }
      continue;
    }

    std::optional<double> planar_z;
    if (const auto* rec = s.store.peer(sender); rec && rec->location) planar_z = rec->location->z;
    if (anchors.size() == 3 && !planar_z) {
      planar_z = (anchors[0].anchor.z + anchors[1].anchor.z + anchors[2].anchor.z) / 3.0;
    }
    auto fix = multilaterate(anchors, s.model, anchors.size() == 3 ? planar_z : std::nullopt);
    auto cell = quantize(fix.estimate, s.params.grid);

    bool any_verified = false;
    std::optional<std::uint64_t> contradicted_seq;
    std::vector<bool> verified(queue.size(), false);
    for (std::size_t i = 0; i < queue.size(); ++i) {
      auto& e = queue[i];
      if (!e.checked_cell || *e.checked_cell != cell) {
        e.checked_cell = cell;
        e.checked_ok =
            verify_location_key(e.msg.signed_payload, fix.estimate, e.msg.payload, s.params.grid);
      }
      if (e.checked_ok) {
        any_verified = true;
        verified[i] = true;
        out.push_back(StoreTrusted{e.msg});
        s.trusted.push_back(e.msg);
        while (s.trusted.size() > kTrustedCapacity) s.trusted.pop_front();
      } else {
        contradicted_seq = e.msg.seq;
      }
    }

    if (any_verified) {
      if (auto* rec = s.store.peer(sender)) rec->location_verified = true;
      std::deque<PoolEntry> kept;
      for (std::size_t i = 0; i < queue.size(); ++i) {
        if (!verified[i]) kept.push_back(std::move(queue[i]));
      }
      queue = std::move(kept);
    }
    if (!contradicted_seq) {
      s.pending_trigger.erase(sender);
      continue;
    }

    // A contradiction alone re-opens dissent only once per pool lifetime;
    // a fired trigger is always forwarded subject to the cooldown.
    auto last = s.last_bft_sent.find(sender);
    bool quiet = last == s.last_bft_sent.end() || now - last->second >= s.params.pool_ttl;
    if (triggered || quiet) {
      s.pending_trigger.erase(sender);
      if (auto bft = make_bft(s, sender, contradicted_seq, now)) {
        out.push_back(SendBft{std::move(*bft)});
      } else if (triggered) {
        out.push_back(Ignore{"bft-cooldown", sender.str()});
      }
    }
  }

  for (auto it = s.pool.by_sender().begin(); it != s.pool.by_sender().end();) {
    it = it->second.empty() ? s.pool.by_sender().erase(it) : std::next(it);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distrust

std::size_t peers_in_range(const NodeState& s, Tick now) {
  std::size_t n = 0;
  for (const auto& [id, rec] : s.store.peers()) {
    auto last = s.store.latest_sample({s.self_id, id}, RssiSource::kMeasured);
    if (last && last->t > now - s.params.bft_window) ++n;
  }
  return n;
}

std::size_t current_tau(const NodeState& s, Tick now) {
  if (s.params.tau) return *s.params.tau;
  double scaled = std::ceil(s.params.tau_fraction * static_cast<double>(peers_in_range(s, now)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(scaled));
}

bool distrust(const NodeState& s, const NodeId& target, Tick now) {
  if (s.store.trust_of(target).value() < s.params.epsilon) return true;
  return s.store.count_recent_bft(target, s.params.bft_window, now) > current_tau(s, now);
}

// ---------------------------------------------------------------------------
// BFT reception and self-defence

const std::array<DefenseRow, 16> kDefenseTable = [] {
  std::array<DefenseRow, 16> rows{};
  for (int i = 0; i < 16; ++i) {
    bool c = i & 8;
    bool h = i & 4;
    bool d_sender = i & 2;
    bool d_self = i & 1;
    DefenseOutcome o = DefenseOutcome::kIgnore;
    if (c && h) {
      o = DefenseOutcome::kIgnore;
    } else if (c && !h && d_sender) {
      o = DefenseOutcome::kSendBft;
    } else if (c && !h && !d_sender && d_self) {
      o = DefenseOutcome::kSelfDistrust;
    } else if (!c && h && d_sender && !d_self) {
      o = DefenseOutcome::kSendBft;
    } else if (!c && !h && d_sender && !d_self) {
      o = DefenseOutcome::kDistrustAlert;
    }
    rows[static_cast<std::size_t>(i)] = {c, h, d_sender, d_self, o};
  }
  return rows;
}();

DefenseOutcome defense_decision(bool c, bool h, bool d_sender, bool d_self) {
  std::size_t i = (c ? 8u : 0u) | (h ? 4u : 0u) | (d_sender ? 2u : 0u) | (d_self ? 1u : 0u);
  return kDefenseTable[i].outcome;
}

std::string_view to_string(DefenseOutcome o) {
  switch (o) {
    case DefenseOutcome::kIgnore: return "ignore";
    case DefenseOutcome::kSendBft: return "send-bft";
    case DefenseOutcome::kSelfDistrust: return "self-distrust";
    case DefenseOutcome::kDistrustAlert: return "distrust-alert";
  }
  return "unknown";
}

DefensePredicates defense_predicates(const NodeState& s, const BftMessage& msg, Tick now) {
  DefensePredicates p;
  const NodeId& sender = msg.sender;
  auto own = s.smoothed(sender);
  if (own) {
    p.c = std::abs(msg.measured_rssi.db() - own->db()) <= s.params.consistency_tol;
    p.h = s.store.history_consistent({s.self_id, sender}, *own, s.params.history_window,
                                     s.params.consistency_tol);
  }
  p.d_sender = distrust(s, sender, now);
  p.d_self = s.moved_flag ||
             s.store.count_recent_bft(s.self_id, s.params.bft_window, now) > current_tau(s, now);
  return p;
}

Actions self_defense(NodeState& s, const BftMessage& msg, Tick now) {
  auto p = defense_predicates(s, msg, now);
  auto outcome = defense_decision(p.c, p.h, p.d_sender, p.d_self);
  switch (outcome) {
    case DefenseOutcome::kIgnore:
      return {Ignore{"self-defense", flags(p)}};
    case DefenseOutcome::kSendBft:
      if (auto bft = make_bft(s, msg.sender, std::nullopt, now)) return {SendBft{std::move(*bft)}};
      return {Ignore{"bft-cooldown", msg.sender.str()}};
    case DefenseOutcome::kSelfDistrust:
      if (auto a = make_alert(s, AlertType::kSelfDistrust, s.self_id, ref_of(msg), now)) {
        return {SendAlert{std::move(*a)}};
      }
      return {Ignore{"alert-cooldown", "self-distrust"}};
    case DefenseOutcome::kDistrustAlert:
      if (auto a = make_alert(s, AlertType::kDistrust, msg.sender, ref_of(msg), now)) {
        return {SendAlert{std::move(*a)}};
      }
      return {Ignore{"alert-cooldown", "distrust " + msg.sender.str()}};
  }
  return {};
}

Actions receive_bft(NodeState& s, const BftMessage& msg, Rssi rssi, Tick now) {
  if (msg.subject == msg.sender) return {Ignore{"malformed", "bft subject equals sender"}};
  if (msg.sender == s.self_id) return {Ignore{"own-identity", msg.sender.str()}};

  // Topology as seen by the BFT sender, then our own view of the sender.
  auto& rec = s.store.upsert_peer(msg.sender);
  rec.location = msg.sender_location;
  record_reported(s, msg.sender, msg.subject, msg.measured_rssi, now);
  observe_sender(s, msg.sender, rssi, now);
  s.store.observe_bft(msg, now);

  if (msg.subject == s.self_id) return self_defense(s, msg, now);
  return {};
}

// ---------------------------------------------------------------------------
// Alerts

std::string_view to_string(AlertVerdict v) {
  switch (v) {
    case AlertVerdict::kAccept: return "accept";
    case AlertVerdict::kReject: return "reject";
    case AlertVerdict::kIgnore: return "ignore";
  }
  return "unknown";
}

AlertVerdict judge_distrust_alert(const NodeState& s, const AlertMessage& alert, Tick now) {
  const auto* accused = std::get_if<NodeId>(&alert.object);
  if (!accused || !alert.ref_bft) return AlertVerdict::kIgnore;
  const NodeId& accuser = alert.sender;

  bool observed = s.store.has_observed(*alert.ref_bft);
  auto accuser_evidence = identity_evidence(s, accuser, now);
  if (!observed || accuser_evidence == Evidence::kDoubted) return AlertVerdict::kReject;
  if (accuser_evidence == Evidence::kConfirmed &&
      identity_evidence(s, *accused, now) == Evidence::kDoubted) {
    return AlertVerdict::kAccept;
  }
  return AlertVerdict::kIgnore;
}

Actions receive_alert(NodeState& s, const AlertMessage& alert, Rssi rssi, Tick now) {
  if (alert.sender == s.self_id) return {Ignore{"own-identity", alert.sender.str()}};
  observe_sender(s, alert.sender, rssi, now);

  Actions out;
  switch (alert.alert_type) {
    case AlertType::kMeasurementAlert:
      out.push_back(Ignore{"measurement-alert", alert.sender.str()});
      break;

    case AlertType::kSelfDistrust: {
      const auto* object = std::get_if<NodeId>(&alert.object);
      if (!object || *object != alert.sender) {
        out.push_back(Ignore{"malformed", "self-distrust object must be its sender"});
        break;
      }
      adjust(s, out, alert.sender, -s.params.trust_step, "self-distrust");
      if (auto* rec = s.store.peer(alert.sender)) rec->location_verified = false;
      break;
    }

    case AlertType::kDistrust: {
      const auto* accused = std::get_if<NodeId>(&alert.object);
      if (!accused || !alert.ref_bft || alert.ref_bft->sender != *accused ||
          alert.ref_bft->subject != alert.sender) {
        out.push_back(Ignore{"malformed", "distrust alert without matching bft reference"});
        break;
      }
      if (*accused == s.self_id) {
        out.push_back(Ignore{"alert-about-self", alert.sender.str()});
        break;
      }
      switch (judge_distrust_alert(s, alert, now)) {
        case AlertVerdict::kAccept:
          adjust(s, out, *accused, -s.params.trust_step, "alert-accepted");
          break;
        case AlertVerdict::kReject: {
          // Everyone who raised dissent about the accuser gains trust.
          auto dissent = s.store.recent_bft_senders(alert.sender, s.params.bft_window, now);
          adjust(s, out, alert.sender, -s.params.trust_step, "alert-rejected");
          for (const auto& x : dissent) {
            if (x != alert.sender) adjust(s, out, x, s.params.trust_step, "dissent-confirmed");
          }
          break;
        }
        case AlertVerdict::kIgnore:
          out.push_back(Ignore{"alert-undecided", alert.sender.str()});
          break;
      }
      break;
    }
  }
  return out;
}

Actions receive_frame(NodeState& s, const Bytes& frame, Rssi rssi, Tick now) {
  Message msg;
  try {
    msg = decode(frame);
  } catch (const DecodeError& e) {
    return {Ignore{"decode-error", e.what()}};
  }
  return std::visit(
      [&](const auto& m) -> Actions {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PayloadMessage>) return receive_payload(s, m, rssi, now);
        if constexpr (std::is_same_v<T, BftMessage>) return receive_bft(s, m, rssi, now);
        if constexpr (std::is_same_v<T, AlertMessage>) return receive_alert(s, m, rssi, now);
      },
      msg);
}

// ---------------------------------------------------------------------------
// Composition

Actions tick_in_place(NodeState& s, const std::vector<Reception>& inbox,
                      const std::optional<Bytes>& sensor_value, Tick now) {
  if (s.moved_flag && s.moved_at && now - *s.moved_at >= s.params.bft_window) {
    s.moved_flag = false;
  }
  Actions out;
  auto append = [&out](Actions more) {
    for (auto& a : more) out.push_back(std::move(a));
  };
  for (const auto& r : inbox) append(receive_frame(s, r.frame, r.rssi, now));
  append(validate_pool(s, now));
  if (sensor_value) append(emit_payload(s, *sensor_value, now));
  return out;
}

TickResult tick(const NodeState& s, const std::vector<Reception>& inbox,
                const std::optional<Bytes>& sensor_value, Tick now) {
  TickResult result{s, {}};
  result.actions = tick_in_place(result.state, inbox, sensor_value, now);
  return result;
}

json to_json(const NodeState& s) {
  json j;
  j["self_id"] = s.self_id.str();
  j["self_location"] = {s.self_location.x, s.self_location.y, s.self_location.z};
  j["params"] = s.params;
  j["filter"] = s.filter;
  j["store"] = s.store.to_json();
  j["moved_flag"] = s.moved_flag;
  j["next_seq"] = s.next_seq;

  json pool = json::array();
  for (const auto& [sender, queue] : s.pool.by_sender()) {
    for (const auto& e : queue) {
      pool.push_back({{"sender", sender.str()},
                      {"seq", e.msg.seq},
                      {"received_at", e.received_at},
                      {"rssi", e.measured_rssi.db()}});
    }
  }
  j["pool"] = std::move(pool);

  json links = json::object();
  for (const auto& [peer, p] : s.links) {
    json l{{"samples", p.samples()}};
    if (auto v = p.smoothed()) l["smoothed"] = v->db();
    if (p.trigger().last_reported) l["last_reported"] = *p.trigger().last_reported;
    if (p.trigger().last_fire) l["last_fire"] = *p.trigger().last_fire;
    links[peer.str()] = std::move(l);
  }
  j["links"] = std::move(links);

  json pending = json::array();
  for (const auto& id : s.pending_trigger) pending.push_back(id.str());
  j["pending_trigger"] = std::move(pending);

  json sent = json::object();
  for (const auto& [id, t] : s.last_bft_sent) sent[id.str()] = t;
  j["last_bft_sent"] = std::move(sent);
  j["trusted"] = s.trusted.size();
  return j;
}

}  // namespace pol
