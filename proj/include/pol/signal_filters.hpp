#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pol/core_model.hpp"

namespace pol {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct MedianState {
  explicit MedianState(std::size_t window = 5);

  std::size_t window;
  std::deque<double> buffer;
};

/// Pushes `v` and returns the median of the buffer. During warm-up with an
/// even number of samples the lower-middle element is returned.
Rssi median_step(MedianState& state, Rssi v);

struct KalmanState {
  KalmanState(double q = 0.01, double r = 4.0);

  double q;
  double r;
  std::optional<double> x;
  double p = 0.0;
};

/// Scalar constant-state Kalman recursion. The first measurement initialises
/// the estimate (x = z, p = r).
Rssi kalman_step(KalmanState& state, Rssi z);

Rssi cascade_step(MedianState& median, KalmanState& kalman, Rssi raw);

struct TriggerState {
  TriggerState(double threshold = 6.0, Tick cooldown = 30);

  double threshold;
  Tick cooldown;
  std::optional<double> last_reported;
  std::optional<Tick> last_fire;
  /// Set by a fire; the reference is re-taken when the cooldown expires.
  bool settle_pending = false;
};

/// True when the smoothed value moved by more than the threshold since the
/// last reported value and the cooldown has elapsed. The first call only
/// records the baseline. The first call after a fire's cooldown that does
/// not fire again moves the reference to the current value.
bool bft_trigger(TriggerState& state, Rssi smoothed, Tick now);

/// Common interface for the offline filter comparison.
class Smoother {
 public:
  virtual ~Smoother() = default;
  virtual double step(double v) = 0;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<Smoother> clone() const = 0;
};

class MovingAverage final : public Smoother {
 public:
  explicit MovingAverage(std::size_t window);
  double step(double v) override;
  std::string name() const override { return "moving_average"; }
  std::unique_ptr<Smoother> clone() const override { return std::make_unique<MovingAverage>(*this); }

 private:
  std::size_t window_;
  std::deque<double> buf_;
};

class ExpSmoothing final : public Smoother {
 public:
  explicit ExpSmoothing(double alpha);
  double step(double v) override;
  std::string name() const override { return "exp_smoothing"; }
  std::unique_ptr<Smoother> clone() const override { return std::make_unique<ExpSmoothing>(*this); }

 private:
  double alpha_;
  std::optional<double> y_;
};

/// Moving average with an adaptive window: halves (min 1) when a sample
/// deviates from the previous output by more than `threshold`, otherwise
/// grows by one up to `max_window`. The filter is not defined anywhere in
/// the literature we follow; this is our own adaptive-window variant.
class DynamicMovingAverage final : public Smoother {
 public:
  DynamicMovingAverage(std::size_t max_window, double threshold);
  double step(double v) override;
  std::string name() const override { return "dynamic_moving_average"; }
  std::unique_ptr<Smoother> clone() const override {
    return std::make_unique<DynamicMovingAverage>(*this);
  }
  std::size_t current_window() const { return window_; }

 private:
  std::size_t max_window_;
  double threshold_;
  std::size_t window_;
  std::deque<double> buf_;
  std::optional<double> y_;
};

/// Gaussian-weighted mean over the last W samples, kernel centred on the
/// middle of the window.
class GaussianFilter final : public Smoother {
 public:
  GaussianFilter(double sigma, std::size_t window);
  double step(double v) override;
  std::string name() const override { return "gaussian"; }
  std::unique_ptr<Smoother> clone() const override { return std::make_unique<GaussianFilter>(*this); }

 private:
  double sigma_;
  std::size_t window_;
  std::deque<double> buf_;
};

class MedianFilter final : public Smoother {
 public:
  explicit MedianFilter(std::size_t window) : state_(window) {}
  double step(double v) override;
  std::string name() const override { return "median"; }
  std::unique_ptr<Smoother> clone() const override { return std::make_unique<MedianFilter>(*this); }

 private:
  MedianState state_;
};

class KalmanFilter final : public Smoother {
 public:
  KalmanFilter(double q, double r) : state_(q, r) {}
  double step(double v) override;
  std::string name() const override { return "kalman"; }
  std::unique_ptr<Smoother> clone() const override { return std::make_unique<KalmanFilter>(*this); }

 private:
  KalmanState state_;
};

class MedianKalman final : public Smoother {
 public:
  MedianKalman(std::size_t window, double q, double r) : median_(window), kalman_(q, r) {}
  double step(double v) override;
  std::string name() const override { return "median_kalman"; }
  std::unique_ptr<Smoother> clone() const override { return std::make_unique<MedianKalman>(*this); }

 private:
  MedianState median_;
  KalmanState kalman_;
};

class RawPassthrough final : public Smoother {
 public:
  double step(double v) override { return v; }
  std::string name() const override { return "raw"; }
  std::unique_ptr<Smoother> clone() const override { return std::make_unique<RawPassthrough>(*this); }
};

/// Names accepted by make_smoother.
const std::vector<std::string>& smoother_names();

/// Builds a filter from its name and a parameter object; missing parameters
/// take the defaults of FilterParams. Throws ConfigError on unknown names or
/// invalid parameters.
std::unique_ptr<Smoother> make_smoother(std::string_view name, const nlohmann::json& params);

/// Per-link smoothing and trigger configuration used by the protocol.
struct FilterParams {
  std::size_t median_window = 5;
  double kalman_q = 0.01;
  double kalman_r = 4.0;
  double threshold = 6.0;
  Tick cooldown = 30;
  /// Samples a link must see before the trigger takes its baseline.
  std::size_t warmup = 20;

  void validate() const;
};

void to_json(nlohmann::json& j, const FilterParams& p);
/// Strict: unknown keys are rejected.
void from_json(const nlohmann::json& j, FilterParams& p);

/// Median -> Kalman cascade followed by the trigger, for one link.
class LinkPipeline {
 public:
  explicit LinkPipeline(const FilterParams& params);

  struct Output {
    Rssi smoothed;
    bool fired = false;
  };

  Output push(Rssi raw, Tick now);
  std::optional<Rssi> smoothed() const { return smoothed_; }
  std::size_t samples() const { return samples_; }
  const TriggerState& trigger() const { return trigger_; }

 private:
  std::size_t warmup_;
  MedianState median_;
  KalmanState kalman_;
  TriggerState trigger_;
  std::optional<Rssi> smoothed_;
  std::size_t samples_ = 0;
};

}  // namespace pol
