#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pol {

using Tick = std::int64_t;
using Bytes = std::vector<std::uint8_t>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidLocation : public Error {
 public:
  using Error::Error;
};

class InvalidValue : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Six-byte hardware address identifying a node on the air.
class NodeId {
 public:
  NodeId() = default;
  explicit NodeId(std::array<std::uint8_t, 6> mac) : mac_(mac) {}

  /// Parses "aa:bb:cc:dd:ee:ff" (either case).
  static NodeId parse(std::string_view text);
  /// Convenience for tests and builtin scenarios: 02:00:00:00:hi:lo.
  static NodeId from_index(std::uint16_t index);

  const std::array<std::uint8_t, 6>& bytes() const { return mac_; }
  std::string str() const;

  auto operator<=>(const NodeId&) const = default;

 private:
  std::array<std::uint8_t, 6> mac_{};
};

struct Location {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  /// Throws InvalidLocation on NaN or infinite coordinates.
  static Location make(double x, double y, double z);

  bool finite() const;
  double distance_to(const Location& other) const;

  bool operator==(const Location&) const = default;
};

class Rssi {
 public:
  static constexpr double kMin = -120.0;
  static constexpr double kMax = 0.0;

  Rssi() = default;
  /// Rejects values outside [kMin, kMax].
  explicit Rssi(double db);
  /// Clamps into [kMin, kMax] instead of rejecting.
  static Rssi clamped(double db);

  double db() const { return db_; }

  auto operator<=>(const Rssi&) const = default;

 private:
  double db_ = kMin;
};

class TrustScore {
 public:
  TrustScore() = default;
  explicit TrustScore(double v) : value_(clamp(v)) {}

  double value() const { return value_; }
  TrustScore adjusted(double delta) const { return TrustScore(value_ + delta); }

  bool operator==(const TrustScore&) const = default;

 private:
  static double clamp(double v);
  double value_ = 1.0;
};

struct LocationKey {
  std::array<std::uint8_t, 32> digest{};

  std::string hex() const;
  bool operator==(const LocationKey&) const = default;
};

enum class SensorType : std::uint8_t {
  kUnknown = 0,
  kTemperature = 1,
  kHumidity = 2,
  kPressure = 3,
  kAcceleration = 4,
};

std::string_view to_string(SensorType type);
SensorType sensor_type_from_string(std::string_view name);

struct PayloadMessage {
  NodeId sender;
  std::uint64_t seq = 0;
  SensorType sensor_type = SensorType::kUnknown;
  Bytes payload;
  LocationKey signed_payload;
  Tick timestamp = 0;

  bool operator==(const PayloadMessage&) const = default;
};

struct BftMessage {
  NodeId sender;
  Location sender_location;
  NodeId subject;
  Rssi measured_rssi;
  std::optional<std::uint64_t> ref_seq;
  Tick timestamp = 0;

  bool operator==(const BftMessage&) const = default;
};

/// Identifies a BFT message without carrying its payload.
struct BftRef {
  NodeId sender;
  NodeId subject;
  Tick timestamp = 0;

  auto operator<=>(const BftRef&) const = default;
};

BftRef ref_of(const BftMessage& msg);

enum class AlertType : std::uint8_t {
  kMeasurementAlert = 1,
  kSelfDistrust = 2,
  kDistrust = 3,
};

std::string_view to_string(AlertType type);

struct SensorReading {
  SensorType sensor_type = SensorType::kUnknown;
  Bytes value;

  bool operator==(const SensorReading&) const = default;
};

struct AlertMessage {
  NodeId sender;
  AlertType alert_type = AlertType::kMeasurementAlert;
  std::variant<NodeId, SensorReading> object;
  std::optional<BftRef> ref_bft;
  Tick timestamp = 0;

  bool operator==(const AlertMessage&) const = default;
};

using Message = std::variant<PayloadMessage, BftMessage, AlertMessage>;

NodeId sender_of(const Message& msg);

/// Default quantization grid for location keys, in metres.
inline constexpr double kDefaultGrid = 0.5;

/// Keyed BLAKE2b-256 digest of `payload`, keyed by the grid indices of `loc`.
LocationKey location_key(const Location& loc, std::span<const std::uint8_t> payload,
                         double grid = kDefaultGrid);

bool verify_location_key(const LocationKey& claimed, const Location& loc,
                         std::span<const std::uint8_t> payload, double grid = kDefaultGrid);

/// Grid indices of a location (round-to-nearest per coordinate).
std::array<std::int64_t, 3> quantize(const Location& loc, double grid);

// Wire format; see docs/wire_format.md.
inline constexpr std::uint8_t kTagPayload = 0x01;
inline constexpr std::uint8_t kTagBft = 0x02;
inline constexpr std::uint8_t kTagAlert = 0x03;

Bytes encode(const Message& msg);
/// Throws DecodeError on truncated, oversized or otherwise malformed frames.
Message decode(std::span<const std::uint8_t> frame);

}  // namespace pol
