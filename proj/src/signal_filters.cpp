#include "pol/signal_filters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace pol {

using nlohmann::json;

MedianState::MedianState(std::size_t w) : window(w) {
  if (w < 1 || w % 2 == 0) throw ConfigError("median window must be an odd count >= 1");
}

Rssi median_step(MedianState& state, Rssi v) {
  state.buffer.push_back(v.db());
  while (state.buffer.size() > state.window) state.buffer.pop_front();
  std::vector<double> sorted(state.buffer.begin(), state.buffer.end());
  std::sort(sorted.begin(), sorted.end());
  return Rssi(sorted[(sorted.size() - 1) / 2]);
}

KalmanState::KalmanState(double q_, double r_) : q(q_), r(r_) {
  if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError("kalman q must be >= 0");
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("kalman r must be > 0");
}

Rssi kalman_step(KalmanState& s, Rssi z) {
  if (!s.x) {
    s.x = z.db();
    s.p = s.r;
    return z;
  }
  s.p += s.q;
  double gain = s.p / (s.p + s.r);
  *s.x += gain * (z.db() - *s.x);
  s.p *= (1.0 - gain);
  return Rssi::clamped(*s.x);
}

Rssi cascade_step(MedianState& median, KalmanState& kalman, Rssi raw) {
  return kalman_step(kalman, median_step(median, raw));
}

TriggerState::TriggerState(double threshold_, Tick cooldown_)
    : threshold(threshold_), cooldown(cooldown_) {
  if (!(threshold > 0.0)) throw ConfigError("trigger threshold must be > 0");
  if (cooldown < 0) throw ConfigError("trigger cooldown must be >= 0");
}

bool bft_trigger(TriggerState& s, Rssi smoothed, Tick now) {
  if (!s.last_reported) {
    s.last_reported = smoothed.db();
    return false;
  }
  bool cooling = s.last_fire && now - *s.last_fire < s.cooldown;
  if (!cooling && std::abs(smoothed.db() - *s.last_reported) > s.threshold) {
    s.last_reported = smoothed.db();
    s.last_fire = now;
    s.settle_pending = true;
    return true;
  }
  // Once the cooldown has run out the level reached by then becomes the
  // reference, so the tail of the same change cannot fire again.
  if (!cooling && s.settle_pending) {
    s.last_reported = smoothed.db();
    s.settle_pending = false;
  }
  return false;
}

MovingAverage::MovingAverage(std::size_t window) : window_(window) {
  if (window < 1) throw ConfigError("moving average window must be >= 1");
}

double MovingAverage::step(double v) {
  buf_.push_back(v);
  if (buf_.size() > window_) buf_.pop_front();
  return std::accumulate(buf_.begin(), buf_.end(), 0.0) / static_cast<double>(buf_.size());
}

ExpSmoothing::ExpSmoothing(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("exp smoothing alpha must be in (0, 1]");
}

double ExpSmoothing::step(double v) {
  y_ = y_ ? alpha_ * v + (1.0 - alpha_) * *y_ : v;
  return *y_;
}

DynamicMovingAverage::DynamicMovingAverage(std::size_t max_window, double threshold)
    : max_window_(max_window), threshold_(threshold), window_(max_window) {
  if (max_window < 1) throw ConfigError("dynamic moving average window must be >= 1");
  if (!(threshold > 0.0)) throw ConfigError("dynamic moving average threshold must be > 0");
}

double DynamicMovingAverage::step(double v) {
  if (y_) {
    if (std::abs(v - *y_) > threshold_) {
      window_ = std::max<std::size_t>(1, window_ / 2);
    } else {
      window_ = std::min(max_window_, window_ + 1);
    }
  }
  buf_.push_back(v);
  while (buf_.size() > max_window_) buf_.pop_front();
  std::size_t n = std::min(window_, buf_.size());
  double sum = std::accumulate(buf_.end() - static_cast<std::ptrdiff_t>(n), buf_.end(), 0.0);
  y_ = sum / static_cast<double>(n);
  return *y_;
}

GaussianFilter::GaussianFilter(double sigma, std::size_t window) : sigma_(sigma), window_(window) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be > 0");
  if (window < 1) throw ConfigError("gaussian window must be >= 1");
}

double GaussianFilter::step(double v) {
  buf_.push_back(v);
  while (buf_.size() > window_) buf_.pop_front();
  double centre = (static_cast<double>(buf_.size()) - 1.0) / 2.0;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < buf_.size(); ++i) {
    double k = static_cast<double>(i) - centre;
    double w = std::exp(-(k * k) / (2.0 * sigma_ * sigma_));
    num += w * buf_[i];
    den += w;
  }
  return num / den;
}

double MedianFilter::step(double v) { return median_step(state_, Rssi::clamped(v)).db(); }

double KalmanFilter::step(double v) { return kalman_step(state_, Rssi::clamped(v)).db(); }

double MedianKalman::step(double v) {
  return cascade_step(median_, kalman_, Rssi::clamped(v)).db();
}

const std::vector<std::string>& smoother_names() {
  static const std::vector<std::string> names = {
      "raw",      "moving_average", "exp_smoothing", "dynamic_moving_average",
      "gaussian", "median",         "kalman",        "median_kalman"};
  return names;
}

namespace {

std::size_t size_param(const json& p, const char* key, std::size_t fallback) {
  if (!p.contains(key)) return fallback;
  auto v = p.at(key).get<double>();
  if (!(v >= 1.0) || v != std::floor(v)) {
    throw ConfigError(std::string(key) + " must be an integer >= 1");
  }
  return static_cast<std::size_t>(v);
}

double real_param(const json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

}  // namespace

std::unique_ptr<Smoother> make_smoother(std::string_view name, const json& params) {
  const json p = params.is_null() ? json::object() : params;
  FilterParams d;
  try {
    if (name == "raw") return std::make_unique<RawPassthrough>();
    if (name == "moving_average") {
      return std::make_unique<MovingAverage>(size_param(p, "ma_window", 5));
    }
    if (name == "exp_smoothing") {
      return std::make_unique<ExpSmoothing>(real_param(p, "alpha", 0.1));
    }
    if (name == "dynamic_moving_average") {
      return std::make_unique<DynamicMovingAverage>(size_param(p, "dma_max_window", 20),
                                                    real_param(p, "dma_threshold", 4.0));
    }
    if (name == "gaussian") {
      return std::make_unique<GaussianFilter>(real_param(p, "gauss_sigma", 2.0),
                                              size_param(p, "gauss_window", 7));
    }
    if (name == "median") {
      return std::make_unique<MedianFilter>(size_param(p, "median_window", d.median_window));
    }
    if (name == "kalman") {
      return std::make_unique<KalmanFilter>(real_param(p, "kalman_q", d.kalman_q),
                                            real_param(p, "kalman_r", d.kalman_r));
    }
    if (name == "median_kalman") {
      return std::make_unique<MedianKalman>(size_param(p, "median_window", d.median_window),
                                            real_param(p, "kalman_q", d.kalman_q),
                                            real_param(p, "kalman_r", d.kalman_r));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad filter parameter: ") + e.what());
  }
  throw ConfigError("unknown filter '" + std::string(name) + "'");
}

void FilterParams::validate() const {
  MedianState m(median_window);
  KalmanState k(kalman_q, kalman_r);
  TriggerState t(threshold, cooldown);
}

void to_json(json& j, const FilterParams& p) {
  j = json{{"median_window", p.median_window}, {"kalman_q", p.kalman_q},
           {"kalman_r", p.kalman_r},           {"threshold", p.threshold},
           {"cooldown", p.cooldown},           {"warmup", p.warmup}};
}

void from_json(const json& j, FilterParams& p) {
  for (const auto& [key, value] : j.items()) {
    if (key == "median_window") p.median_window = value.get<std::size_t>();
    else if (key == "kalman_q") p.kalman_q = value.get<double>();
    else if (key == "kalman_r") p.kalman_r = value.get<double>();
    else if (key == "threshold") p.threshold = value.get<double>();
    else if (key == "cooldown") p.cooldown = value.get<Tick>();
    else if (key == "warmup") p.warmup = value.get<std::size_t>();
    else throw ConfigError("unknown filter key '" + key + "'");
  }
}

LinkPipeline::LinkPipeline(const FilterParams& params)
    : warmup_(params.warmup),
      median_(params.median_window),
      kalman_(params.kalman_q, params.kalman_r),
      trigger_(params.threshold, params.cooldown) {}

LinkPipeline::Output LinkPipeline::push(Rssi raw, Tick now) {
  auto smoothed = cascade_step(median_, kalman_, raw);
  smoothed_ = smoothed;
  ++samples_;
  bool fired = false;
  if (samples_ >= warmup_) fired = bft_trigger(trigger_, smoothed, now);
  return {smoothed, fired};
}

}  // namespace pol
