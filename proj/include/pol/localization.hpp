#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pol/core_model.hpp"

namespace pol {

class TopologyStore;

class InsufficientAnchors : public Error {
 public:
  using Error::Error;
};

/// Log-distance path-loss model: rssi(d) = p0 - 10 n log10(d / d0).
struct PathLossModel {
  double p0 = -40.0;
  double n = 2.0;
  double d0 = 1.0;

  void validate() const;
};

struct AnchorObservation {
  Location anchor;
  Rssi rssi;
};

/// Throws InvalidValue for d <= 0. The result is clamped to the Rssi range.
Rssi rssi_from_distance(const PathLossModel& m, double d);
double distance_from_rssi(const PathLossModel& m, Rssi r);

struct LaterationResult {
  Location estimate;
  /// RMS of (|x - anchor_i| - d_i) at the estimate, metres.
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr int kMaxGaussNewtonIterations = 50;
inline constexpr double kStepTolerance = 1e-9;

/// Gauss-Newton least squares over range residuals, starting at the anchor
/// centroid. With `known_z` the solve is planar (x, y) and needs three
/// anchors, otherwise four. Throws InsufficientAnchors below that.
LaterationResult multilaterate(std::span<const AnchorObservation> obs, const PathLossModel& m,
                               std::optional<double> known_z = std::nullopt);

enum class Verification { kVerified, kContradicted, kInsufficientData };

std::string_view to_string(Verification v);

struct VerificationOutcome {
  Verification result = Verification::kInsufficientData;
  std::optional<LaterationResult> lateration;
  std::size_t anchors = 0;
};

/// Observer-side context for collecting anchors about a subject.
struct AnchorQuery {
  NodeId self_id;
  Location self_location;
  /// The observer's own smoothed RSSI of the subject, if any.
  std::optional<Rssi> own_rssi;
  Tick now = 0;
  /// Reported entries older than this many ticks are ignored.
  Tick freshness = 60;
};

/// Own measurement plus every fresh reported RSSI about `subject` from a peer
/// whose location is known.
std::vector<AnchorObservation> gather_anchors(const NodeId& subject, const TopologyStore& store,
                                              const AnchorQuery& query);

/// Multilaterates the subject and checks its location key against the
/// estimate quantised to `grid`. Falls back to a planar solve with three
/// anchors, using the subject's stored z or else the anchor mean.
VerificationOutcome locate_and_verify(const NodeId& subject, const TopologyStore& store,
                                      const PayloadMessage& msg, const PathLossModel& m,
                                      double grid, const AnchorQuery& query);

/// Same decision over an explicit anchor set.
VerificationOutcome verify_with_anchors(std::span<const AnchorObservation> anchors,
                                        const PayloadMessage& msg, const PathLossModel& m,
                                        double grid, std::optional<double> planar_z);

}  // namespace pol
