#include "pol/radio_channel.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "pol/signal_filters.hpp"

namespace pol {

using nlohmann::json;

void ChannelConfig::validate() const {
  model.validate();
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be >= 0");
  }
  if (!(asymmetry_jitter >= 0.0 && asymmetry_jitter <= kMaxAsymmetryJitter)) {
    throw ConfigError("asymmetry_jitter must be in [0, 2.5]");
  }
  if (!(range > 0.0)) throw ConfigError("range must be > 0");
}

void to_json(json& j, const ChannelConfig& c) {
  j = json{{"p0", c.model.p0},
           {"n", c.model.n},
           {"d0", c.model.d0},
           {"noise_sigma", c.noise_sigma},
           {"asymmetry_jitter", c.asymmetry_jitter},
           {"range", c.range}};
}

void from_json(const json& j, ChannelConfig& c) {
  for (const auto& [key, v] : j.items()) {
    if (key == "p0") c.model.p0 = v.get<double>();
    else if (key == "n") c.model.n = v.get<double>();
    else if (key == "d0") c.model.d0 = v.get<double>();
    else if (key == "noise_sigma") c.noise_sigma = v.get<double>();
    else if (key == "asymmetry_jitter") c.asymmetry_jitter = v.get<double>();
    else if (key == "range") c.range = v.get<double>();
    else throw ConfigError("unknown channel key '" + key + "'");
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t pack(const NodeId& id) {
  std::uint64_t v = 0;
  for (auto b : id.bytes()) v = (v << 8) | b;
  return v;
}

}  // namespace

RadioChannel::RadioChannel(const ChannelConfig& config) : config_(config), rng_(config.seed) {
  config_.validate();
}

void RadioChannel::add(const NodeId& radio, const Location& at) {
  if (!at.finite()) throw InvalidLocation("radio location must be finite");
  if (!radios_.try_emplace(radio, Radio{at, false}).second) {
    throw InvalidValue("radio " + radio.str() + " already registered");
  }
}

void RadioChannel::move(const NodeId& radio, const Location& to) {
  auto it = radios_.find(radio);
  if (it == radios_.end()) throw UnknownRadio("unknown radio " + radio.str());
  if (!to.finite()) throw InvalidLocation("radio location must be finite");
  it->second.at = to;
}

void RadioChannel::set_muted(const NodeId& radio, bool muted) {
  auto it = radios_.find(radio);
  if (it == radios_.end()) throw UnknownRadio("unknown radio " + radio.str());
  it->second.muted = muted;
}

const Location& RadioChannel::location_of(const NodeId& radio) const {
  auto it = radios_.find(radio);
  if (it == radios_.end()) throw UnknownRadio("unknown radio " + radio.str());
  return it->second.at;
}

double RadioChannel::link_jitter(const NodeId& from, const NodeId& to) const {
  if (config_.asymmetry_jitter == 0.0) return 0.0;
  std::uint64_t h = splitmix64(config_.seed ^ splitmix64(pack(from) ^ splitmix64(pack(to))));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * config_.asymmetry_jitter;
}

double RadioChannel::mean_rssi(const NodeId& from, const NodeId& to) const {
  double d = location_of(from).distance_to(location_of(to));
  // Co-located radios are treated as being at the reference distance.
  d = std::max(d, config_.model.d0);
  return rssi_from_distance(config_.model, d).db() + link_jitter(from, to);
}

// Box-Muller on raw 64-bit draws; std::normal_distribution is not
// reproducible across standard libraries.
double RadioChannel::gaussian() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::vector<Delivery> RadioChannel::broadcast(const NodeId& from) {
  auto src = radios_.find(from);
  if (src == radios_.end()) throw UnknownRadio("unknown radio " + from.str());
  std::vector<Delivery> out;
  if (src->second.muted) return out;
  for (const auto& [id, radio] : radios_) {
    if (id == from) continue;
    if (src->second.at.distance_to(radio.at) > config_.range) continue;
    double v = mean_rssi(from, id);
    if (config_.noise_sigma > 0.0) v += config_.noise_sigma * gaussian();
    out.push_back({id, Rssi::clamped(v)});
  }
  return out;
}

}  // namespace pol
