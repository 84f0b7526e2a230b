#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pol/core_model.hpp"
#include "pol/localization.hpp"

namespace pol {

/// Upper bound on |asymmetry_jitter| so that a link pair differs by at most 5 dB.
inline constexpr double kMaxAsymmetryJitter = 2.5;

struct ChannelConfig {
  PathLossModel model;
  double noise_sigma = 2.0;
  double asymmetry_jitter = 1.5;
  double range = 20.0;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ChannelConfig& c);
/// Strict: unknown keys are rejected. The seed is not part of the object.
void from_json(const nlohmann::json& j, ChannelConfig& c);

struct Delivery {
  NodeId to;
  Rssi rssi;
};

class UnknownRadio : public Error {
 public:
  using Error::Error;
};

/// Broadcast medium over registered radios. Radios are keyed by their own
/// address, which need not match the sender field of what they transmit.
class RadioChannel {
 public:
  explicit RadioChannel(const ChannelConfig& config);

  void add(const NodeId& radio, const Location& at);
  void move(const NodeId& radio, const Location& to);
  /// A muted radio stops transmitting but still receives.
  void set_muted(const NodeId& radio, bool muted);
  bool contains(const NodeId& radio) const { return radios_.contains(radio); }
  const Location& location_of(const NodeId& radio) const;

  /// Every other radio in range, ascending by address, with one
  /// noise draw per delivery in that order.
  std::vector<Delivery> broadcast(const NodeId& from);

  /// Noise-free RSSI of the ordered link from -> to, including its jitter.
  double mean_rssi(const NodeId& from, const NodeId& to) const;
  /// Fixed per-ordered-link offset in [-asymmetry_jitter, +asymmetry_jitter].
  double link_jitter(const NodeId& from, const NodeId& to) const;

  const ChannelConfig& config() const { return config_; }

 private:
  struct Radio {
    Location at;
    bool muted = false;
  };

  double gaussian();

  ChannelConfig config_;
  std::map<NodeId, Radio> radios_;
  std::mt19937_64 rng_;
  std::optional<double> spare_;
};

}  // namespace pol
