#include "pol/signal_filters.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace pol;
using nlohmann::json;

namespace {

// Straight transcription of the scalar recursion, kept apart from the
// library code so the two can be compared.
struct RefKalman {
  double q, r, x = 0, p = 0;
  bool init = false;
  double step(double z) {
    if (!init) {
      init = true;
      x = z;
      p = r;
      return x;
    }
    double pp = p + q;
    double k = pp / (pp + r);
    x = x + k * (z - x);
    p = (1 - k) * pp;
    return x;
  }
};

double ref_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

}  // namespace

TEST(Median, SpecExamples) {
  MedianState m(5);
  double out = 0;
  for (double v : {-40.0, -41.0, -90.0, -40.0, -42.0}) out = median_step(m, Rssi(v)).db();
  EXPECT_DOUBLE_EQ(out, -41.0);
}

TEST(Median, EvenWarmupTakesLowerMiddle) {
  MedianState m(5);
  EXPECT_DOUBLE_EQ(median_step(m, Rssi(-40)).db(), -40);
  // Sorted [-90, -40]; index (2-1)/2 = 0.
  EXPECT_DOUBLE_EQ(median_step(m, Rssi(-90)).db(), -90);
}

TEST(Median, RejectsEvenOrZeroWindow) {
  EXPECT_THROW(MedianState(0), ConfigError);
  EXPECT_THROW(MedianState(4), ConfigError);
}

TEST(Median, MatchesReferenceOnRandomInput) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-110, -10);
  for (std::size_t w : {1u, 3u, 5u, 7u}) {
    MedianState m(w);
    std::vector<double> seen;
    for (int i = 0; i < 300; ++i) {
      double v = u(rng);
      seen.push_back(v);
      std::vector<double> tail(seen.end() - static_cast<std::ptrdiff_t>(std::min(w, seen.size())),
                               seen.end());
      ASSERT_DOUBLE_EQ(median_step(m, Rssi(v)).db(), ref_median(tail));
    }
  }
}

TEST(Kalman, SingleUpdateArithmetic) {
  KalmanState k(0.0, 4.0);
  k.x = -40.0;
  k.p = 1.0;
  EXPECT_NEAR(kalman_step(k, Rssi(-46)).db(), -41.2, 1e-12);
  EXPECT_NEAR(k.p, 0.8, 1e-12);
}

TEST(Kalman, FirstMeasurementInitialises) {
  KalmanState k(0.01, 4.0);
  EXPECT_DOUBLE_EQ(kalman_step(k, Rssi(-55)).db(), -55);
  EXPECT_DOUBLE_EQ(k.p, 4.0);
}

TEST(Kalman, MatchesReferenceRecursion) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0, 3);
  KalmanState k(0.01, 4.0);
  RefKalman ref{0.01, 4.0};
  for (int i = 0; i < 200; ++i) {
    double z = std::clamp(-60 + noise(rng), Rssi::kMin, Rssi::kMax);
    ASSERT_NEAR(kalman_step(k, Rssi(z)).db(), ref.step(z), 1e-9) << "step " << i;
  }
}

TEST(Kalman, RejectsBadParameters) {
  EXPECT_THROW(KalmanState(-1, 4), ConfigError);
  EXPECT_THROW(KalmanState(0.01, 0), ConfigError);
}

TEST(Cascade, SpikeIsRemovedBeforeKalman) {
  MedianState m(5);
  KalmanState k(0.01, 4.0);
  double last = 0;
  for (int i = 0; i < 10; ++i) last = cascade_step(m, k, Rssi(-50)).db();
  double spiked = cascade_step(m, k, Rssi(-100)).db();
  EXPECT_DOUBLE_EQ(spiked, last);
}

TEST(Cascade, StepIsFollowed) {
  MedianState m(5);
  KalmanState k(0.01, 4.0);
  for (int i = 0; i < 50; ++i) cascade_step(m, k, Rssi(-50));
  double out = 0;
  for (int i = 0; i < 100; ++i) out = cascade_step(m, k, Rssi(-60)).db();
  EXPECT_LT(out, -57.0);
}

TEST(Trigger, SpecExamples) {
  TriggerState s(6.0, 30);
  EXPECT_FALSE(bft_trigger(s, Rssi(-50), 0));
  EXPECT_FALSE(bft_trigger(s, Rssi(-55), 1));
  EXPECT_TRUE(bft_trigger(s, Rssi(-57), 2));
  EXPECT_DOUBLE_EQ(*s.last_reported, -57);
  // Within the cooldown nothing fires.
  EXPECT_FALSE(bft_trigger(s, Rssi(-70), 10));
}

TEST(Trigger, ThresholdIsStrict) {
  TriggerState s(6.0, 30);
  bft_trigger(s, Rssi(-50), 0);
  EXPECT_FALSE(bft_trigger(s, Rssi(-56), 1));
}

TEST(Trigger, ReferenceSettlesAfterCooldown) {
  TriggerState s(6.0, 30);
  bft_trigger(s, Rssi(-50), 0);
  EXPECT_TRUE(bft_trigger(s, Rssi(-57), 1));
  // The slow tail of the same change lands at -62; once the cooldown is
  // over it becomes the reference instead of firing again.
  for (Tick t = 2; t <= 31; ++t) EXPECT_FALSE(bft_trigger(s, Rssi(-62), t));
  EXPECT_FALSE(bft_trigger(s, Rssi(-62), 32));
  EXPECT_DOUBLE_EQ(*s.last_reported, -62);
  EXPECT_FALSE(s.settle_pending);
  // A return to the old level is a new change.
  EXPECT_TRUE(bft_trigger(s, Rssi(-50), 40));
}

TEST(Trigger, RejectsBadParameters) {
  EXPECT_THROW(TriggerState(0, 30), ConfigError);
  EXPECT_THROW(TriggerState(6, -1), ConfigError);
}

TEST(TriggerProperty, ConstantInputNeverFires) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    TriggerState s(0.5 + (rng() % 100) / 10.0, static_cast<Tick>(rng() % 40));
    Rssi v(-20.0 - static_cast<double>(rng() % 90));
    for (Tick t = 0; t < 100; ++t) ASSERT_FALSE(bft_trigger(s, v, t));
  }
}

TEST(TriggerProperty, FiresAreSeparatedByCooldown) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-100, -20);
  for (int i = 0; i < 100; ++i) {
    Tick cooldown = static_cast<Tick>(rng() % 40);
    TriggerState s(3.0, cooldown);
    std::optional<Tick> prev;
    for (Tick t = 0; t < 500; ++t) {
      if (bft_trigger(s, Rssi(u(rng)), t)) {
        if (prev) ASSERT_GE(t - *prev, cooldown);
        prev = t;
      }
    }
  }
}

class SmootherBounds : public ::testing::TestWithParam<std::string> {};

TEST_P(SmootherBounds, OutputStaysWithinInputRange) {
  auto f = make_smoother(GetParam(), json::object());
  EXPECT_EQ(f->name(), GetParam());
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-90, -30);
  double lo = 0, hi = -200;
  for (int i = 0; i < 1000; ++i) {
    double v = u(rng);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    double out = f->step(v);
    ASSERT_GE(out, lo - 1e-9);
    ASSERT_LE(out, hi + 1e-9);
  }
}

TEST_P(SmootherBounds, ConstantInputIsAFixedPoint) {
  auto f = make_smoother(GetParam(), json::object());
  for (int i = 0; i < 50; ++i) ASSERT_NEAR(f->step(-63.5), -63.5, 1e-9);
}

TEST_P(SmootherBounds, CloneIsIndependent) {
  auto f = make_smoother(GetParam(), json::object());
  for (int i = 0; i < 10; ++i) f->step(-40.0 - i);
  auto g = f->clone();
  for (int i = 0; i < 10; ++i) ASSERT_DOUBLE_EQ(f->step(-70.0 + i), g->step(-70.0 + i));
}

INSTANTIATE_TEST_SUITE_P(All, SmootherBounds, ::testing::ValuesIn(smoother_names()));

TEST(Smoothers, MovingAverageWindow) {
  MovingAverage f(3);
  EXPECT_DOUBLE_EQ(f.step(-30), -30);
  EXPECT_DOUBLE_EQ(f.step(-60), -45);
  EXPECT_DOUBLE_EQ(f.step(-90), -60);
  EXPECT_DOUBLE_EQ(f.step(-90), -80);
}

TEST(Smoothers, ExpSmoothing) {
  ExpSmoothing f(0.25);
  EXPECT_DOUBLE_EQ(f.step(-40), -40);
  EXPECT_DOUBLE_EQ(f.step(-80), -50);
}

TEST(Smoothers, DynamicWindowShrinksOnJump) {
  DynamicMovingAverage f(8, 5.0);
  for (int i = 0; i < 20; ++i) f.step(-50);
  EXPECT_EQ(f.current_window(), 8u);
  f.step(-70);
  EXPECT_EQ(f.current_window(), 4u);
  f.step(-70);
  EXPECT_EQ(f.current_window(), 2u);
}

TEST(Smoothers, GaussianIsSymmetricMean) {
  GaussianFilter f(1.0, 3);
  f.step(-40);
  f.step(-50);
  // Weights e^-0.5, 1, e^-0.5 around -50 on a symmetric pair average to -50.
  EXPECT_NEAR(f.step(-60), -50.0, 1e-12);
}

TEST(MakeSmoother, RejectsUnknownNameAndBadParams) {
  EXPECT_THROW(make_smoother("butterworth", json::object()), ConfigError);
  EXPECT_THROW(make_smoother("median", json{{"median_window", 4}}), ConfigError);
  EXPECT_THROW(make_smoother("kalman", json{{"kalman_r", -1}}), ConfigError);
}

TEST(FilterParamsJson, StrictRoundTrip) {
  FilterParams p;
  p.threshold = 4.5;
  json j = p;
  EXPECT_DOUBLE_EQ(j.get<FilterParams>().threshold, 4.5);
  j["bogus"] = 1;
  EXPECT_THROW(j.get<FilterParams>(), ConfigError);
}

TEST(LinkPipeline, WarmupDelaysBaseline) {
  FilterParams p;
  p.warmup = 5;
  LinkPipeline lp(p);
  for (Tick t = 0; t < 4; ++t) {
    lp.push(Rssi(-50), t);
    EXPECT_FALSE(lp.trigger().last_reported);
  }
  lp.push(Rssi(-50), 4);
  EXPECT_TRUE(lp.trigger().last_reported);
  EXPECT_EQ(lp.samples(), 5u);
}

TEST(LinkPipeline, DetectsSustainedShift) {
  LinkPipeline lp{FilterParams{}};
  bool fired = false;
  Tick t = 0;
  for (; t < 60; ++t) ASSERT_FALSE(lp.push(Rssi(-50), t).fired);
  for (; t < 120 && !fired; ++t) fired = lp.push(Rssi(-65), t).fired;
  EXPECT_TRUE(fired);
}
