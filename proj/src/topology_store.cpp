#include "pol/topology_store.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace pol {

using nlohmann::json;

std::string_view to_string(RssiSource source) {
  return source == RssiSource::kMeasured ? "measured" : "reported";
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw InvalidValue("median of empty set");
  // Lower-middle element for even counts.
  auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

RssiHistory::RssiHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidValue("history capacity must be positive");
}

void RssiHistory::push(const RssiSample& sample) {
  if (!samples_.empty()) {
    const auto& last = samples_.back();
    if (sample.t < last.t) {
      throw OrderingError("sample at tick " + std::to_string(sample.t) +
                          " precedes last sample at tick " + std::to_string(last.t));
    }
    if (sample.t == last.t) {
      for (auto it = samples_.rbegin(); it != samples_.rend() && it->t == sample.t; ++it) {
        if (it->source == sample.source) {
          throw OrderingError("duplicate " + std::string(to_string(sample.source)) +
                              " sample at tick " + std::to_string(sample.t));
        }
      }
    }
  }
  samples_.push_back(sample);
  while (samples_.size() > capacity_) samples_.pop_front();
}

TopologyStore::TopologyStore(std::size_t history_capacity, double initial_trust)
    : capacity_(history_capacity), initial_trust_(TrustScore(initial_trust).value()) {
  if (history_capacity == 0) throw InvalidValue("history capacity must be positive");
}

void TopologyStore::record_rssi(const LinkKey& link, Tick t, Rssi v, RssiSource source) {
  if (link.observer == link.observed) throw InvalidValue("self-link " + link.observer.str());
  auto it = links_.find(link);
  if (it == links_.end()) it = links_.emplace(link, RssiHistory(capacity_)).first;
  it->second.push({t, v, source});
}

std::optional<RssiSample> TopologyStore::latest_sample(const LinkKey& link,
                                                       std::optional<RssiSource> source) const {
  auto it = links_.find(link);
  if (it == links_.end()) return std::nullopt;
  const auto& samples = it->second.samples();
  for (auto s = samples.rbegin(); s != samples.rend(); ++s) {
    if (!source || s->source == *source) return *s;
  }
  return std::nullopt;
}

std::optional<Rssi> TopologyStore::latest_rssi(const LinkKey& link,
                                               std::optional<RssiSource> source) const {
  auto s = latest_sample(link, source);
  if (!s) return std::nullopt;
  return s->value;
}

bool TopologyStore::history_consistent(const LinkKey& link, Rssi candidate, std::size_t window,
                                       double tol) const {
  if (window == 0) throw InvalidValue("consistency window must be >= 1");
  if (!(tol >= 0.0)) throw InvalidValue("consistency tolerance must be >= 0");
  auto it = links_.find(link);
  if (it == links_.end()) return true;

  std::vector<double> recent;
  const auto& samples = it->second.samples();
  for (auto s = samples.rbegin(); s != samples.rend() && recent.size() < window; ++s) {
    if (s->source == RssiSource::kMeasured) recent.push_back(s->value.db());
  }
  if (recent.empty()) return true;
  return std::abs(candidate.db() - median_of(std::move(recent))) <= tol;
}

const RssiHistory* TopologyStore::history(const LinkKey& link) const {
  auto it = links_.find(link);
  return it == links_.end() ? nullptr : &it->second;
}

PeerRecord& TopologyStore::upsert_peer(const NodeId& id) {
  auto it = peers_.find(id);
  if (it == peers_.end()) {
    PeerRecord rec;
    rec.id = id;
    rec.trust = TrustScore(initial_trust_);
    it = peers_.emplace(id, rec).first;
  }
  return it->second;
}

const PeerRecord* TopologyStore::peer(const NodeId& id) const {
  auto it = peers_.find(id);
  return it == peers_.end() ? nullptr : &it->second;
}

PeerRecord* TopologyStore::peer(const NodeId& id) {
  auto it = peers_.find(id);
  return it == peers_.end() ? nullptr : &it->second;
}

TrustScore TopologyStore::adjust_trust(const NodeId& id, double delta) {
  auto* rec = peer(id);
  if (!rec) throw MissingPeer("unknown peer " + id.str());
  rec->trust = rec->trust.adjusted(delta);
  return rec->trust;
}

TrustScore TopologyStore::trust_of(const NodeId& id) const {
  const auto* rec = peer(id);
  return rec ? rec->trust : TrustScore(initial_trust_);
}

void TopologyStore::observe_bft(const BftMessage& msg, Tick received_at) {
  auto& last = bft_seen_[msg.subject][msg.sender];
  last = std::max(last, received_at);

  auto ref = ref_of(msg);
  if (observed_ref_set_.insert(ref).second) {
    observed_refs_.push_back(ref);
    while (observed_refs_.size() > kObservedRefCapacity) {
      observed_ref_set_.erase(observed_refs_.front());
      observed_refs_.pop_front();
    }
  }
}

std::vector<NodeId> TopologyStore::recent_bft_senders(const NodeId& subject, Tick window,
                                                      Tick now) const {
  if (window <= 0) throw InvalidValue("bft window must be positive");
  std::vector<NodeId> out;
  auto it = bft_seen_.find(subject);
  if (it == bft_seen_.end()) return out;
  for (const auto& [sender, t] : it->second) {
    if (t > now - window && t <= now) out.push_back(sender);
  }
  return out;
}

std::size_t TopologyStore::count_recent_bft(const NodeId& subject, Tick window, Tick now) const {
  return recent_bft_senders(subject, window, now).size();
}

bool TopologyStore::has_observed(const BftRef& ref) const {
  return observed_ref_set_.contains(ref);
}

namespace {

json location_json(const Location& l) { return json::array({l.x, l.y, l.z}); }

Location location_from(const json& j) {
  return Location::make(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

json TopologyStore::to_json() const {
  json doc;
  doc["history_capacity"] = capacity_;
  doc["initial_trust"] = initial_trust_;

  json peers = json::array();
  for (const auto& [id, rec] : peers_) {
    peers.push_back({{"id", id.str()},
                     {"sensor_type", std::string(to_string(rec.sensor_type))},
                     {"location", rec.location ? location_json(*rec.location) : json(nullptr)},
                     {"location_verified", rec.location_verified},
                     {"trust", rec.trust.value()}});
  }
  doc["peers"] = std::move(peers);

  json links = json::array();
  for (const auto& [key, hist] : links_) {
    json samples = json::array();
    for (const auto& s : hist.samples()) {
      samples.push_back({{"t", s.t}, {"v", s.value.db()}, {"source", to_string(s.source)}});
    }
    links.push_back({{"observer", key.observer.str()},
                     {"observed", key.observed.str()},
                     {"history", std::move(samples)}});
  }
  doc["links"] = std::move(links);

  json bft = json::array();
  for (const auto& [subject, senders] : bft_seen_) {
    for (const auto& [sender, t] : senders) {
      bft.push_back({{"subject", subject.str()}, {"sender", sender.str()}, {"t", t}});
    }
  }
  doc["bft_seen"] = std::move(bft);

  json refs = json::array();
  for (const auto& r : observed_refs_) {
    refs.push_back({{"sender", r.sender.str()}, {"subject", r.subject.str()}, {"t", r.timestamp}});
  }
  doc["observed_refs"] = std::move(refs);
  return doc;
}

TopologyStore TopologyStore::from_json(const json& doc) {
  TopologyStore store(doc.at("history_capacity").get<std::size_t>(),
                      doc.value("initial_trust", 1.0));
  for (const auto& p : doc.at("peers")) {
    auto& rec = store.upsert_peer(NodeId::parse(p.at("id").get<std::string>()));
    rec.sensor_type = sensor_type_from_string(p.value("sensor_type", std::string("unknown")));
    if (p.contains("location") && !p.at("location").is_null()) {
      rec.location = location_from(p.at("location"));
    }
    rec.location_verified = p.value("location_verified", false);
    rec.trust = TrustScore(p.at("trust").get<double>());
  }
  for (const auto& l : doc.at("links")) {
    LinkKey key{NodeId::parse(l.at("observer").get<std::string>()),
                NodeId::parse(l.at("observed").get<std::string>())};
    for (const auto& s : l.at("history")) {
      auto src = s.at("source").get<std::string>();
      if (src != "measured" && src != "reported") throw InvalidValue("unknown source " + src);
      store.record_rssi(key, s.at("t").get<Tick>(), Rssi(s.at("v").get<double>()),
                        src == "measured" ? RssiSource::kMeasured : RssiSource::kReported);
    }
  }
  if (doc.contains("bft_seen")) {
    for (const auto& b : doc.at("bft_seen")) {
      store.bft_seen_[NodeId::parse(b.at("subject").get<std::string>())]
                     [NodeId::parse(b.at("sender").get<std::string>())] = b.at("t").get<Tick>();
    }
  }
  if (doc.contains("observed_refs")) {
    for (const auto& r : doc.at("observed_refs")) {
      BftRef ref{NodeId::parse(r.at("sender").get<std::string>()),
                 NodeId::parse(r.at("subject").get<std::string>()), r.at("t").get<Tick>()};
      if (store.observed_ref_set_.insert(ref).second) store.observed_refs_.push_back(ref);
    }
  }
  return store;
}

}  // namespace pol
