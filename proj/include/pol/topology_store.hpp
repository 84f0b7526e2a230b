#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pol/core_model.hpp"

namespace pol {

class OrderingError : public Error {
 public:
  using Error::Error;
};

class MissingPeer : public Error {
 public:
  using Error::Error;
};

/// Directional link: RSSI of `observed` as measured (or reported) by `observer`.
struct LinkKey {
  NodeId observer;
  NodeId observed;

  auto operator<=>(const LinkKey&) const = default;
};

enum class RssiSource : std::uint8_t { kMeasured = 0, kReported = 1 };

std::string_view to_string(RssiSource source);

struct RssiSample {
  Tick t = 0;
  Rssi value;
  RssiSource source = RssiSource::kMeasured;

  bool operator==(const RssiSample&) const = default;
};

/// Bounded, time-ordered sample history for one link. Oldest entries are evicted first.
class RssiHistory {
 public:
  explicit RssiHistory(std::size_t capacity);

  void push(const RssiSample& sample);

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return samples_.empty(); }
  const std::deque<RssiSample>& samples() const { return samples_; }

 private:
  std::size_t capacity_;
  std::deque<RssiSample> samples_;
};

struct PeerRecord {
  NodeId id;
  SensorType sensor_type = SensorType::kUnknown;
  std::optional<Location> location;
  bool location_verified = false;
  TrustScore trust;
};

inline constexpr std::size_t kDefaultHistoryCapacity = 64;

/// One node's memory of the network: link histories, peer attributes and
/// the BFT messages it has observed.
class TopologyStore {
 public:
  explicit TopologyStore(std::size_t history_capacity = kDefaultHistoryCapacity,
                         double initial_trust = 1.0);

  std::size_t history_capacity() const { return capacity_; }
  double initial_trust() const { return initial_trust_; }

  // Links

  /// Appends a sample, creating the link if needed. Timestamps on a link must
  /// not decrease; an equal timestamp is accepted only for a source that has
  /// no sample at that tick yet.
  void record_rssi(const LinkKey& link, Tick t, Rssi v, RssiSource source);

  std::optional<Rssi> latest_rssi(const LinkKey& link,
                                  std::optional<RssiSource> source = std::nullopt) const;
  std::optional<RssiSample> latest_sample(const LinkKey& link,
                                          std::optional<RssiSource> source = std::nullopt) const;

  /// |candidate - median(last `window` measured values)| <= tol. Vacuously
  /// true when the link has no measured values.
  bool history_consistent(const LinkKey& link, Rssi candidate, std::size_t window,
                          double tol) const;

  const RssiHistory* history(const LinkKey& link) const;
  const std::map<LinkKey, RssiHistory>& links() const { return links_; }
  std::size_t link_count() const { return links_.size(); }

  // Peers

  PeerRecord& upsert_peer(const NodeId& id);
  const PeerRecord* peer(const NodeId& id) const;
  PeerRecord* peer(const NodeId& id);
  const std::map<NodeId, PeerRecord>& peers() const { return peers_; }

  /// Clamped trust update. Throws MissingPeer for an unknown id.
  TrustScore adjust_trust(const NodeId& id, double delta);
  /// Trust of a peer, or the initial trust for an unknown id.
  TrustScore trust_of(const NodeId& id) const;

  // BFT observations

  void observe_bft(const BftMessage& msg, Tick received_at);
  /// Distinct senders with a BFT about `subject` observed in (now - window, now].
  std::size_t count_recent_bft(const NodeId& subject, Tick window, Tick now) const;
  std::vector<NodeId> recent_bft_senders(const NodeId& subject, Tick window, Tick now) const;
  bool has_observed(const BftRef& ref) const;

  nlohmann::json to_json() const;
  static TopologyStore from_json(const nlohmann::json& doc);

 private:
  static constexpr std::size_t kObservedRefCapacity = 256;

  std::size_t capacity_;
  double initial_trust_;
  std::map<LinkKey, RssiHistory> links_;
  std::map<NodeId, PeerRecord> peers_;
  // subject -> sender -> last tick a BFT from sender about subject was seen
  std::map<NodeId, std::map<NodeId, Tick>> bft_seen_;
  std::deque<BftRef> observed_refs_;
  std::set<BftRef> observed_ref_set_;
};

double median_of(std::vector<double> values);

}  // namespace pol
