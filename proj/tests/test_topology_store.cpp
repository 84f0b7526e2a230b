#include "pol/topology_store.hpp"

#include <random>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace pol;

namespace {

const NodeId A = NodeId::from_index(1);
const NodeId B = NodeId::from_index(2);
const NodeId C = NodeId::from_index(3);
const NodeId D = NodeId::from_index(4);

BftMessage bft(const NodeId& sender, const NodeId& subject, Tick t) {
  BftMessage m;
  m.sender = sender;
  m.subject = subject;
  m.measured_rssi = Rssi(-50);
  m.timestamp = t;
  return m;
}

}  // namespace

TEST(RecordRssi, CreatesLinkOnFirstRecord) {
  TopologyStore s;
  s.record_rssi({A, B}, 1, Rssi(-40), RssiSource::kMeasured);
  EXPECT_EQ(s.link_count(), 1u);
  EXPECT_EQ(s.history({A, B})->size(), 1u);
}

TEST(RecordRssi, EvictsOldestBeyondCapacity) {
  TopologyStore s(64);
  for (int t = 0; t <= 64; ++t) s.record_rssi({A, B}, t, Rssi(-40.0 - t * 0.1), RssiSource::kMeasured);
  const auto* h = s.history({A, B});
  ASSERT_EQ(h->size(), 64u);
  EXPECT_EQ(h->samples().front().t, 1);
}

TEST(RecordRssi, KeepsBothSourcesAtSameTick) {
  TopologyStore s;
  s.record_rssi({A, B}, 5, Rssi(-40), RssiSource::kMeasured);
  s.record_rssi({A, B}, 5, Rssi(-41), RssiSource::kReported);
  EXPECT_EQ(s.history({A, B})->size(), 2u);
  EXPECT_THROW(s.record_rssi({A, B}, 5, Rssi(-42), RssiSource::kMeasured), OrderingError);
  EXPECT_THROW(s.record_rssi({A, B}, 4, Rssi(-42), RssiSource::kReported), OrderingError);
}

TEST(RecordRssi, RejectsSelfLink) {
  TopologyStore s;
  EXPECT_THROW(s.record_rssi({A, A}, 1, Rssi(-40), RssiSource::kMeasured), InvalidValue);
}

TEST(LatestRssi, Basics) {
  TopologyStore s;
  EXPECT_FALSE(s.latest_rssi({A, B}));
  s.record_rssi({A, B}, 1, Rssi(-40), RssiSource::kMeasured);
  s.record_rssi({A, B}, 2, Rssi(-46), RssiSource::kMeasured);
  EXPECT_DOUBLE_EQ(s.latest_rssi({A, B})->db(), -46);
  s.record_rssi({C, D}, 1, Rssi(-46), RssiSource::kReported);
  EXPECT_FALSE(s.latest_rssi({C, D}, RssiSource::kMeasured));
  EXPECT_TRUE(s.latest_rssi({C, D}, RssiSource::kReported));
}

TEST(HistoryConsistent, SpecExamples) {
  TopologyStore s;
  s.record_rssi({A, B}, 1, Rssi(-45), RssiSource::kMeasured);
  s.record_rssi({A, B}, 2, Rssi(-44), RssiSource::kMeasured);
  s.record_rssi({A, B}, 3, Rssi(-46), RssiSource::kMeasured);
  EXPECT_TRUE(s.history_consistent({A, B}, Rssi(-45), 32, 5));
  EXPECT_FALSE(s.history_consistent({A, B}, Rssi(-60), 32, 5));
  EXPECT_TRUE(s.history_consistent({A, C}, Rssi(-90), 32, 5));
}

TEST(HistoryConsistent, IgnoresReportedAndUsesWindow) {
  TopologyStore s;
  for (int t = 0; t < 10; ++t) s.record_rssi({A, B}, t, Rssi(-80), RssiSource::kMeasured);
  for (int t = 10; t < 13; ++t) s.record_rssi({A, B}, t, Rssi(-40), RssiSource::kMeasured);
  s.record_rssi({A, B}, 13, Rssi(-10), RssiSource::kReported);
  EXPECT_TRUE(s.history_consistent({A, B}, Rssi(-40), 3, 1));
  EXPECT_FALSE(s.history_consistent({A, B}, Rssi(-40), 10, 1));
}

TEST(AdjustTrust, ClampsAndRequiresKnownPeer) {
  TopologyStore s;
  EXPECT_THROW(s.adjust_trust(B, 0.1), MissingPeer);
  s.upsert_peer(B).trust = TrustScore(0.5);
  EXPECT_DOUBLE_EQ(s.adjust_trust(B, 0.1).value(), 0.6);
  s.peer(B)->trust = TrustScore(0.05);
  EXPECT_DOUBLE_EQ(s.adjust_trust(B, -0.1).value(), 0.0);
  EXPECT_DOUBLE_EQ(s.adjust_trust(B, -0.1).value(), 0.0);
  s.peer(B)->trust = TrustScore(1.0);
  EXPECT_DOUBLE_EQ(s.adjust_trust(B, 0.1).value(), 1.0);
  EXPECT_DOUBLE_EQ(s.adjust_trust(B, 0.1).value(), 1.0);
}

TEST(TrustOf, UnknownPeerHasInitialTrust) {
  TopologyStore s(64, 0.7);
  EXPECT_DOUBLE_EQ(s.trust_of(D).value(), 0.7);
}

TEST(CountRecentBft, CountsDistinctSendersInWindow) {
  TopologyStore s;
  EXPECT_EQ(s.count_recent_bft(A, 60, 100), 0u);
  s.observe_bft(bft(B, A, 90), 90);
  s.observe_bft(bft(C, A, 91), 91);
  s.observe_bft(bft(B, A, 92), 92);
  std::set<NodeId> oracle{B, C};
  EXPECT_EQ(s.count_recent_bft(A, 60, 100), oracle.size());
}

TEST(CountRecentBft, WindowIsHalfOpen) {
  TopologyStore s;
  s.observe_bft(bft(B, A, 10), 10);
  s.observe_bft(bft(C, A, 20), 20);
  EXPECT_EQ(s.count_recent_bft(A, 60, 100), 0u);
  EXPECT_EQ(s.count_recent_bft(A, 60, 70), 1u);
  EXPECT_EQ(s.count_recent_bft(A, 60, 69), 2u);
}

TEST(ObservedRefs, AreRemembered) {
  TopologyStore s;
  auto m = bft(B, A, 7);
  EXPECT_FALSE(s.has_observed(ref_of(m)));
  s.observe_bft(m, 7);
  EXPECT_TRUE(s.has_observed(ref_of(m)));
  EXPECT_FALSE(s.has_observed(BftRef{B, A, 8}));
}

TEST(StoreJson, RoundTrips) {
  TopologyStore s(16, 0.9);
  s.record_rssi({A, B}, 1, Rssi(-40.25), RssiSource::kMeasured);
  s.record_rssi({B, C}, 2, Rssi(-55.5), RssiSource::kReported);
  auto& p = s.upsert_peer(B);
  p.location = Location{1, 2, 3};
  p.sensor_type = SensorType::kHumidity;
  p.trust = TrustScore(0.4);
  s.observe_bft(bft(B, C, 2), 2);

  auto doc = s.to_json();
  auto back = TopologyStore::from_json(doc);
  EXPECT_EQ(back.to_json(), doc);
  EXPECT_EQ(back.history_capacity(), 16u);
  EXPECT_DOUBLE_EQ(back.trust_of(B).value(), 0.4);
  EXPECT_EQ(back.count_recent_bft(C, 60, 3), 1u);
}

TEST(StoreProperty, RandomSequencesKeepHistoriesSortedAndBounded) {
  std::mt19937_64 rng(99);
  const std::vector<NodeId> ids{A, B, C, D};
  for (int round = 0; round < 50; ++round) {
    const std::size_t cap = 1 + rng() % 20;
    TopologyStore s(cap);
    Tick now = 0;
    for (int i = 0; i < 500; ++i) {
      now += static_cast<Tick>(rng() % 3);
      NodeId o = ids[rng() % 4];
      NodeId d = ids[rng() % 4];
      auto src = (rng() & 1) ? RssiSource::kMeasured : RssiSource::kReported;
      try {
        s.record_rssi({o, d}, now - static_cast<Tick>(rng() % 2), Rssi(-50), src);
      } catch (const OrderingError&) {
      } catch (const InvalidValue&) {
        ASSERT_EQ(o, d);
      }
    }
    for (const auto& [link, h] : s.links()) {
      ASSERT_NE(link.observer, link.observed);
      ASSERT_LE(h.size(), cap);
      const auto& v = h.samples();
      for (std::size_t i = 1; i < v.size(); ++i) {
        ASSERT_LE(v[i - 1].t, v[i].t);
        if (v[i - 1].t == v[i].t) ASSERT_NE(v[i - 1].source, v[i].source);
      }
    }
  }
}

TEST(MedianOf, LowerMiddleForEvenCounts) {
  EXPECT_DOUBLE_EQ(median_of({-45, -44, -46}), -45);
  EXPECT_DOUBLE_EQ(median_of({-40, -90}), -90);
  EXPECT_DOUBLE_EQ(median_of({1, 2, 3, 4}), 2);
  EXPECT_THROW(median_of({}), InvalidValue);
}
