#include "pol/radio_channel.hpp"
#include "pol/signal_filters.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace pol;

namespace {

NodeId id(int i) { return NodeId::from_index(static_cast<std::uint16_t>(i)); }

ChannelConfig quiet(double jitter = 0.0) {
  ChannelConfig c;
  c.noise_sigma = 0.0;
  c.asymmetry_jitter = jitter;
  c.seed = 4;
  return c;
}

}  // namespace

TEST(Channel, ReferenceDistanceWithoutNoise) {
  RadioChannel ch(quiet());
  ch.add(id(1), {0, 0, 0});
  ch.add(id(2), {1, 0, 0});
  auto d = ch.broadcast(id(1));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].to, id(2));
  EXPECT_DOUBLE_EQ(d[0].rssi.db(), -40.0);
}

TEST(Channel, OutOfRangeIsDropped) {
  RadioChannel ch(quiet());
  ch.add(id(1), {0, 0, 0});
  ch.add(id(2), {25, 0, 0});
  ch.add(id(3), {5, 0, 0});
  auto d = ch.broadcast(id(1));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].to, id(3));
}

TEST(Channel, DeliveriesAscendByAddress) {
  RadioChannel ch(ChannelConfig{});
  for (int i : {5, 2, 9, 1, 7}) ch.add(id(i), {static_cast<double>(i), 0, 0});
  auto d = ch.broadcast(id(5));
  ASSERT_EQ(d.size(), 4u);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LT(d[i - 1].to, d[i].to);
}

TEST(Channel, MutedRadioStillReceives) {
  RadioChannel ch(quiet());
  ch.add(id(1), {0, 0, 0});
  ch.add(id(2), {1, 0, 0});
  ch.set_muted(id(2), true);
  EXPECT_TRUE(ch.broadcast(id(2)).empty());
  EXPECT_EQ(ch.broadcast(id(1)).size(), 1u);
}

TEST(Channel, UnknownAndDuplicateRadios) {
  RadioChannel ch(quiet());
  ch.add(id(1), {0, 0, 0});
  EXPECT_THROW(ch.add(id(1), {1, 0, 0}), InvalidValue);
  EXPECT_THROW(ch.broadcast(id(2)), UnknownRadio);
  EXPECT_THROW(ch.move(id(2), {0, 0, 0}), UnknownRadio);
}

TEST(Channel, SameSeedSameDraws) {
  auto draw = [](std::uint64_t seed) {
    ChannelConfig c;
    c.seed = seed;
    RadioChannel ch(c);
    ch.add(id(1), {0, 0, 0});
    ch.add(id(2), {3, 0, 0});
    ch.add(id(3), {0, 3, 0});
    std::vector<double> out;
    for (int i = 0; i < 100; ++i) {
      for (const auto& d : ch.broadcast(id(1 + i % 3))) out.push_back(d.rssi.db());
    }
    return out;
  };
  EXPECT_EQ(draw(8), draw(8));
  EXPECT_NE(draw(8), draw(9));
}

TEST(Channel, DoublingDistanceDropsSixDb) {
  RadioChannel ch(quiet(1.5));
  ch.add(id(1), {0, 0, 0});
  ch.add(id(2), {2, 0, 0});
  double before = ch.mean_rssi(id(1), id(2));
  ch.move(id(2), {4, 0, 0});
  // 20 log10(2) to 18 digits, computed outside this code base.
  EXPECT_NEAR(before - ch.mean_rssi(id(1), id(2)), 6.020599913279623904, 1e-12);
}

TEST(Channel, JitterIsFixedPerOrderedLinkAndBounded) {
  ChannelConfig c;
  c.asymmetry_jitter = kMaxAsymmetryJitter;
  RadioChannel ch(c);
  for (int a = 1; a < 30; ++a) {
    for (int b = 1; b < 30; ++b) {
      if (a == b) continue;
      double j = ch.link_jitter(id(a), id(b));
      ASSERT_EQ(j, ch.link_jitter(id(a), id(b)));
      ASSERT_LE(std::abs(j), kMaxAsymmetryJitter);
    }
  }
}

TEST(ChannelProperty, NoiseFreePairsDifferByAtMostFiveDb) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-8, 8);
  ChannelConfig c = quiet(kMaxAsymmetryJitter);
  RadioChannel ch(c);
  for (int i = 1; i <= 20; ++i) ch.add(id(i), {u(rng), u(rng), u(rng)});
  for (int a = 1; a <= 20; ++a) {
    for (int b = a + 1; b <= 20; ++b) {
      ASSERT_LE(std::abs(ch.mean_rssi(id(a), id(b)) - ch.mean_rssi(id(b), id(a))), 5.0);
    }
  }
}

TEST(ChannelProperty, MeanRssiFallsWithDistance) {
  RadioChannel ch(quiet());
  ch.add(id(1), {0, 0, 0});
  ch.add(id(2), {1, 0, 0});
  double prev = ch.mean_rssi(id(1), id(2));
  for (double x = 1.25; x < 19; x += 0.25) {
    ch.move(id(2), {x, 0, 0});
    double v = ch.mean_rssi(id(1), id(2));
    ASSERT_LT(v, prev);
    prev = v;
  }
}

TEST(ChannelSettings, ValidationAndStrictJson) {
  ChannelConfig c;
  c.asymmetry_jitter = 3.0;
  EXPECT_THROW(c.validate(), ConfigError);
  nlohmann::json j = ChannelConfig{};
  EXPECT_NO_THROW(j.get<ChannelConfig>());
  j["bandwidth"] = 1;
  EXPECT_THROW(j.get<ChannelConfig>(), Error);
}
