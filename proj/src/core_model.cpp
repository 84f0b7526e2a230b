#include "pol/core_model.hpp"

#include <sodium.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>

namespace pol {

namespace {

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

constexpr char kHex[] = "0123456789abcdef";

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw Error("libsodium initialisation failed");
  });
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void node(const NodeId& id) { raw(id.bytes()); }
  void blob(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    raw(b);
  }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    auto b = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  NodeId node() {
    auto b = need(6);
    std::array<std::uint8_t, 6> mac{};
    std::copy(b.begin(), b.end(), mac.begin());
    return NodeId(mac);
  }
  Bytes blob() {
    auto n = u32();
    auto b = need(n);
    return Bytes(b.begin(), b.end());
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (in_.size() - pos_ < n) throw DecodeError("truncated frame");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

SensorType checked_sensor(std::uint8_t v) {
  if (v > static_cast<std::uint8_t>(SensorType::kAcceleration)) {
    throw DecodeError("unknown sensor type " + std::to_string(v));
  }
  return static_cast<SensorType>(v);
}

Rssi checked_rssi(double v) {
  if (!(v >= Rssi::kMin && v <= Rssi::kMax)) throw DecodeError("rssi out of range");
  return Rssi(v);
}

Location checked_location(double x, double y, double z) {
  Location loc{x, y, z};
  if (!loc.finite()) throw DecodeError("non-finite location");
  return loc;
}

bool flag(Reader& r) {
  auto v = r.u8();
  if (v > 1) throw DecodeError("bad presence flag");
  return v == 1;
}

void encode_body(Writer& w, const PayloadMessage& m) {
  w.node(m.sender);
  w.u64(m.seq);
  w.u8(static_cast<std::uint8_t>(m.sensor_type));
  w.i64(m.timestamp);
  w.raw(m.signed_payload.digest);
  w.blob(m.payload);
}

void encode_body(Writer& w, const BftMessage& m) {
  w.node(m.sender);
  w.f64(m.sender_location.x);
  w.f64(m.sender_location.y);
  w.f64(m.sender_location.z);
  w.node(m.subject);
  w.f64(m.measured_rssi.db());
  w.u8(m.ref_seq ? 1 : 0);
  if (m.ref_seq) w.u64(*m.ref_seq);
  w.i64(m.timestamp);
}

void encode_body(Writer& w, const AlertMessage& m) {
  w.node(m.sender);
  w.u8(static_cast<std::uint8_t>(m.alert_type));
  if (const auto* id = std::get_if<NodeId>(&m.object)) {
    w.u8(0);
    w.node(*id);
  } else {
    const auto& reading = std::get<SensorReading>(m.object);
    w.u8(1);
    w.u8(static_cast<std::uint8_t>(reading.sensor_type));
    w.blob(reading.value);
  }
  w.u8(m.ref_bft ? 1 : 0);
  if (m.ref_bft) {
    w.node(m.ref_bft->sender);
    w.node(m.ref_bft->subject);
    w.i64(m.ref_bft->timestamp);
  }
  w.i64(m.timestamp);
}

PayloadMessage decode_payload(Reader& r) {
  PayloadMessage m;
  m.sender = r.node();
  m.seq = r.u64();
  m.sensor_type = checked_sensor(r.u8());
  m.timestamp = r.i64();
  for (auto& b : m.signed_payload.digest) b = r.u8();
  m.payload = r.blob();
  return m;
}

BftMessage decode_bft(Reader& r) {
  BftMessage m;
  m.sender = r.node();
  double x = r.f64();
  double y = r.f64();
  double z = r.f64();
  m.sender_location = checked_location(x, y, z);
  m.subject = r.node();
  m.measured_rssi = checked_rssi(r.f64());
  if (flag(r)) m.ref_seq = r.u64();
  m.timestamp = r.i64();
  if (m.subject == m.sender) throw DecodeError("bft subject equals sender");
  return m;
}

AlertMessage decode_alert(Reader& r) {
  AlertMessage m;
  m.sender = r.node();
  auto type = r.u8();
  if (type < 1 || type > 3) throw DecodeError("unknown alert type " + std::to_string(type));
  m.alert_type = static_cast<AlertType>(type);
  auto kind = r.u8();
  if (kind == 0) {
    m.object = r.node();
  } else if (kind == 1) {
    SensorReading reading;
    reading.sensor_type = checked_sensor(r.u8());
    reading.value = r.blob();
    m.object = std::move(reading);
  } else {
    throw DecodeError("unknown alert object kind");
  }
  if (flag(r)) {
    BftRef ref;
    ref.sender = r.node();
    ref.subject = r.node();
    ref.timestamp = r.i64();
    m.ref_bft = ref;
  }
  m.timestamp = r.i64();
  return m;
}

}  // namespace

NodeId NodeId::parse(std::string_view text) {
  if (text.size() != 17) throw InvalidValue("malformed MAC '" + std::string(text) + "'");
  std::array<std::uint8_t, 6> mac{};
  for (std::size_t i = 0; i < 6; ++i) {
    int hi = hex_digit(text[i * 3]);
    int lo = hex_digit(text[i * 3 + 1]);
    if (hi < 0 || lo < 0 || (i < 5 && text[i * 3 + 2] != ':')) {
      throw InvalidValue("malformed MAC '" + std::string(text) + "'");
    }
    mac[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return NodeId(mac);
}

NodeId NodeId::from_index(std::uint16_t index) {
  return NodeId({0x02, 0x00, 0x00, 0x00, static_cast<std::uint8_t>(index >> 8),
                 static_cast<std::uint8_t>(index & 0xff)});
}

std::string NodeId::str() const {
  std::string s;
  s.reserve(17);
  for (std::size_t i = 0; i < 6; ++i) {
    if (i) s.push_back(':');
    s.push_back(kHex[mac_[i] >> 4]);
    s.push_back(kHex[mac_[i] & 0xf]);
  }
  return s;
}

Location Location::make(double x, double y, double z) {
  Location loc{x, y, z};
  if (!loc.finite()) throw InvalidLocation("location coordinates must be finite");
  return loc;
}

bool Location::finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

double Location::distance_to(const Location& o) const {
  return std::sqrt((x - o.x) * (x - o.x) + (y - o.y) * (y - o.y) + (z - o.z) * (z - o.z));
}

Rssi::Rssi(double db) : db_(db) {
  if (!(db >= kMin && db <= kMax)) {
    throw InvalidValue("rssi " + std::to_string(db) + " dB outside [-120, 0]");
  }
}

Rssi Rssi::clamped(double db) {
  if (std::isnan(db)) throw InvalidValue("rssi is NaN");
  return Rssi(std::clamp(db, kMin, kMax));
}

double TrustScore::clamp(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, 0.0, 1.0);
}

std::string LocationKey::hex() const {
  std::string s;
  s.reserve(64);
  for (auto b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

std::string_view to_string(SensorType type) {
  switch (type) {
    case SensorType::kTemperature: return "temperature";
    case SensorType::kHumidity: return "humidity";
    case SensorType::kPressure: return "pressure";
    case SensorType::kAcceleration: return "acceleration";
    case SensorType::kUnknown: break;
  }
  return "unknown";
}

SensorType sensor_type_from_string(std::string_view name) {
  for (auto t : {SensorType::kUnknown, SensorType::kTemperature, SensorType::kHumidity,
                 SensorType::kPressure, SensorType::kAcceleration}) {
    if (to_string(t) == name) return t;
  }
  throw InvalidValue("unknown sensor type '" + std::string(name) + "'");
}

std::string_view to_string(AlertType type) {
  switch (type) {
    case AlertType::kMeasurementAlert: return "measurement";
    case AlertType::kSelfDistrust: return "self-distrust";
    case AlertType::kDistrust: return "distrust";
  }
  return "unknown";
}

BftRef ref_of(const BftMessage& msg) { return {msg.sender, msg.subject, msg.timestamp}; }

NodeId sender_of(const Message& msg) {
  return std::visit([](const auto& m) { return m.sender; }, msg);
}

std::array<std::int64_t, 3> quantize(const Location& loc, double grid) {
  if (!(grid > 0.0) || !std::isfinite(grid)) throw InvalidValue("grid must be positive");
  if (!loc.finite()) throw InvalidLocation("cannot quantize a non-finite location");
  return {std::llround(loc.x / grid), std::llround(loc.y / grid), std::llround(loc.z / grid)};
}

LocationKey location_key(const Location& loc, std::span<const std::uint8_t> payload,
                         double grid) {
  ensure_sodium();
  Writer key;
  for (auto idx : quantize(loc, grid)) key.i64(idx);
  Bytes key_bytes = key.take();
  static_assert(crypto_generichash_BYTES == 32);

  LocationKey out;
  crypto_generichash(out.digest.data(), out.digest.size(), payload.data(), payload.size(),
                     key_bytes.data(), key_bytes.size());
  return out;
}

bool verify_location_key(const LocationKey& claimed, const Location& loc,
                         std::span<const std::uint8_t> payload, double grid) {
  auto expected = location_key(loc, payload, grid);
  return sodium_memcmp(expected.digest.data(), claimed.digest.data(), expected.digest.size()) == 0;
}

Bytes encode(const Message& msg) {
  Writer body;
  std::uint8_t tag = 0;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PayloadMessage>) tag = kTagPayload;
        if constexpr (std::is_same_v<T, BftMessage>) tag = kTagBft;
        if constexpr (std::is_same_v<T, AlertMessage>) tag = kTagAlert;
        encode_body(body, m);
      },
      msg);
  Bytes b = body.take();
  Writer frame;
  frame.u8(tag);
  frame.blob(b);
  return frame.take();
}

Message decode(std::span<const std::uint8_t> frame) {
  Reader outer(frame);
  auto tag = outer.u8();
  Bytes body = outer.blob();
  if (!outer.done()) throw DecodeError("trailing bytes after frame");

  Reader r(body);
  Message out;
  switch (tag) {
    case kTagPayload: out = decode_payload(r); break;
    case kTagBft: out = decode_bft(r); break;
    case kTagAlert: out = decode_alert(r); break;
    default: throw DecodeError("unknown message tag " + std::to_string(tag));
  }
  if (!r.done()) throw DecodeError("trailing bytes in message body");
  return out;
}

}  // namespace pol
