#include "pol/localization.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "pol/topology_store.hpp"

namespace pol {

void PathLossModel::validate() const {
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidValue("path-loss exponent must be > 0");
  if (!(d0 > 0.0) || !std::isfinite(d0)) throw InvalidValue("reference distance must be > 0");
  if (!std::isfinite(p0)) throw InvalidValue("reference power must be finite");
}

Rssi rssi_from_distance(const PathLossModel& m, double d) {
  if (!(d > 0.0)) throw InvalidValue("distance must be > 0");
  return Rssi::clamped(m.p0 - 10.0 * m.n * std::log10(d / m.d0));
}

double distance_from_rssi(const PathLossModel& m, Rssi r) {
  return m.d0 * std::pow(10.0, (m.p0 - r.db()) / (10.0 * m.n));
}

namespace {

template <int Dim>
LaterationResult solve(std::span<const AnchorObservation> obs, const std::vector<double>& ranges,
                       double fixed_z) {
  using Vec = Eigen::Matrix<double, Dim, 1>;
  using Mat = Eigen::Matrix<double, Dim, Dim>;

  auto to_vec = [](const Location& l) {
    Vec v;
    v(0) = l.x;
    v(1) = l.y;
    if constexpr (Dim == 3) v(2) = l.z;
    return v;
  };
  auto to_location = [fixed_z](const Vec& v) {
    return Location{v(0), v(1), Dim == 3 ? v(Dim - 1) : fixed_z};
  };

  // Anchor offsets out of the solved plane enter as a constant term.
  std::vector<Vec> anchors;
  std::vector<double> dz2;
  for (const auto& o : obs) {
    anchors.push_back(to_vec(o.anchor));
    double dz = Dim == 3 ? 0.0 : o.anchor.z - fixed_z;
    dz2.push_back(dz * dz);
  }

  auto cost = [&](const Vec& x) {
    double c = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      double r = std::sqrt((x - anchors[i]).squaredNorm() + dz2[i]) - ranges[i];
      c += r * r;
    }
    return c;
  };

  Vec x = Vec::Zero();
  for (const auto& a : anchors) x += a;
  x /= static_cast<double>(anchors.size());

  LaterationResult out;
  double current = cost(x);
  for (int it = 1; it <= kMaxGaussNewtonIterations; ++it) {
    out.iterations = it;
    Mat jtj = Mat::Zero();
    Vec jtr = Vec::Zero();
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      Vec diff = x - anchors[i];
      double dist = std::sqrt(diff.squaredNorm() + dz2[i]);
      if (dist < 1e-12) continue;
      Vec row = diff / dist;
      double r = dist - ranges[i];
      jtj += row * row.transpose();
      jtr += row * r;
    }
    Eigen::LDLT<Mat> ldlt(jtj);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    Vec step = ldlt.solve(-jtr);
    if (!step.allFinite()) break;

    // Halve the step while it makes things worse.
    Vec candidate = x + step;
    double next = cost(candidate);
    for (int k = 0; k < 30 && next > current; ++k) {
      step *= 0.5;
      candidate = x + step;
      next = cost(candidate);
    }
    x = candidate;
    current = next;
    if (step.norm() < kStepTolerance) {
      out.converged = true;
      break;
    }
  }

  out.estimate = to_location(x);
  out.residual = std::sqrt(current / static_cast<double>(anchors.size()));
  return out;
}

}  // namespace

LaterationResult multilaterate(std::span<const AnchorObservation> obs, const PathLossModel& m,
                               std::optional<double> known_z) {
  m.validate();
  std::size_t needed = known_z ? 3 : 4;
  if (obs.size() < needed) {
    throw InsufficientAnchors("multilateration needs " + std::to_string(needed) +
                              " anchors, got " + std::to_string(obs.size()));
  }
  std::vector<double> ranges;
  ranges.reserve(obs.size());
  for (const auto& o : obs) {
    if (!o.anchor.finite()) throw InvalidLocation("anchor location must be finite");
    ranges.push_back(distance_from_rssi(m, o.rssi));
  }
  if (known_z) return solve<2>(obs, ranges, *known_z);
  return solve<3>(obs, ranges, 0.0);
}

std::string_view to_string(Verification v) {
  switch (v) {
    case Verification::kVerified: return "verified";
    case Verification::kContradicted: return "contradicted";
    case Verification::kInsufficientData: return "insufficient-data";
  }
  return "unknown";
}

std::vector<AnchorObservation> gather_anchors(const NodeId& subject, const TopologyStore& store,
                                              const AnchorQuery& query) {
  std::vector<AnchorObservation> anchors;
  if (query.own_rssi) anchors.push_back({query.self_location, *query.own_rssi});
  for (const auto& [id, rec] : store.peers()) {
    if (id == subject || id == query.self_id || !rec.location) continue;
    auto sample = store.latest_sample({id, subject}, RssiSource::kReported);
    if (!sample || sample->t <= query.now - query.freshness) continue;
    anchors.push_back({*rec.location, sample->value});
  }
  return anchors;
}

VerificationOutcome verify_with_anchors(std::span<const AnchorObservation> anchors,
                                        const PayloadMessage& msg, const PathLossModel& m,
                                        double grid, std::optional<double> planar_z) {
  VerificationOutcome out;
  out.anchors = anchors.size();
  std::optional<double> known_z;
  if (anchors.size() < 3) return out;
  if (anchors.size() == 3) {
    if (planar_z) {
      known_z = planar_z;
    } else {
      double sum = 0.0;
      for (const auto& a : anchors) sum += a.anchor.z;
      known_z = sum / 3.0;
    }
  }
  out.lateration = multilaterate(anchors, m, known_z);
  out.result = verify_location_key(msg.signed_payload, out.lateration->estimate, msg.payload, grid)
                   ? Verification::kVerified
                   : Verification::kContradicted;
  return out;
}

VerificationOutcome locate_and_verify(const NodeId& subject, const TopologyStore& store,
                                      const PayloadMessage& msg, const PathLossModel& m,
                                      double grid, const AnchorQuery& query) {
  auto anchors = gather_anchors(subject, store, query);
  std::optional<double> planar_z;
  if (const auto* rec = store.peer(subject); rec && rec->location) planar_z = rec->location->z;
  return verify_with_anchors(anchors, msg, m, grid, planar_z);
}

}  // namespace pol
