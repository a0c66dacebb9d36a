#pragma once

// Lumped-element design helpers and a magnetostatic field mapper for the
// microwave delivery loop: resonance and bandwidth of a parallel resonator
// with series loss in the inductor, quarter-wave impedance matching, and
// Biot-Savart field maps with uniformity / efficiency metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nvsim/constants.hpp"

namespace nvsim {

struct RLCDesign {
  double inductance_h = 0.0;
  double capacitance_f = 0.0;
  double series_resistance_ohm = 0.0;
  double drive_power_w = 1.0;

  void validate() const {
    if (!(inductance_h > 0.0) || !(capacitance_f > 0.0))
      throw std::invalid_argument("resonator: L and C must be positive");
    if (!(series_resistance_ohm >= 0.0))
      throw std::invalid_argument("resonator: negative series resistance");
    if (!(drive_power_w >= 0.0))
      throw std::invalid_argument("resonator: negative drive power");
  }
};

inline double resonant_frequency(const RLCDesign& design) {
  design.validate();
  return 1.0 / (2.0 * M_PI * std::sqrt(design.inductance_h * design.capacitance_f));
}

/// Capacitance that resonates `inductance_h` at `f0_hz`.
inline double capacitance_for(double f0_hz, double inductance_h) {
  if (!(f0_hz > 0.0) || !(inductance_h > 0.0))
    throw std::invalid_argument("resonator: frequency and inductance must be positive");
  const double w0 = 2.0 * M_PI * f0_hz;
  return 1.0 / (w0 * w0 * inductance_h);
}

struct BandwidthQ {
  double q = 0.0;
  double bandwidth_hz = 0.0;
  bool infinite_q = false;  // lossless design: R = 0
};

/// Q = (1/R) sqrt(L/C) for series loss in the loop inductor resonated by a
/// parallel capacitor; 3 dB bandwidth = f0 / Q.
inline BandwidthQ bandwidth_and_q(const RLCDesign& design) {
  design.validate();
  BandwidthQ out;
  if (design.series_resistance_ohm == 0.0) {
    out.q = std::numeric_limits<double>::infinity();
    out.bandwidth_hz = 0.0;
    out.infinite_q = true;
    return out;
  }
  out.q = std::sqrt(design.inductance_h / design.capacitance_f) / design.series_resistance_ohm;
  out.bandwidth_hz = resonant_frequency(design) / out.q;
  return out;
}

/// Characteristic impedance of the quarter-wave section matching z_source
/// to z_load.
inline double quarter_wave_match(double z_source_ohm, double z_load_ohm) {
  if (!(z_source_ohm > 0.0) || !(z_load_ohm > 0.0))
    throw std::invalid_argument("resonator: impedances must be positive");
  return std::sqrt(z_source_ohm * z_load_ohm);
}

/// Current circulating in the loop at resonance: the drive current sqrt(P/R)
/// enhanced by Q.
inline double loop_current(const RLCDesign& design) {
  const BandwidthQ bq = bandwidth_and_q(design);
  if (bq.infinite_q)
    throw std::invalid_argument("resonator: loop current undefined for R = 0");
  return bq.q * std::sqrt(design.drive_power_w / design.series_resistance_ohm);
}

// ---------------------------------------------------------------------------
// Biot-Savart field mapping

/// A wire as a polyline; `closed` joins the last point back to the first.
struct WireGeometry {
  std::vector<Eigen::Vector3d> points;
  bool closed = false;
  double wire_radius_m = 1e-4;
  std::string id = "polyline";

  void validate() const {
    if (points.size() < 2) throw std::invalid_argument("resonator: geometry needs >= 2 points");
    double length = 0.0;
    const std::size_t n = points.size();
    for (std::size_t i = 0; i + 1 < n; ++i) length += (points[i + 1] - points[i]).norm();
    if (closed) length += (points.front() - points.back()).norm();
    if (!(length > 0.0)) throw std::invalid_argument("resonator: degenerate geometry");
    if (!(wire_radius_m >= 0.0)) throw std::invalid_argument("resonator: negative wire radius");
  }
};

/// A circular loop discretized into `segments` chords.
inline WireGeometry circular_loop(double radius_m, const Eigen::Vector3d& center,
                                  const Eigen::Vector3d& normal, int segments = 10'000) {
  if (!(radius_m > 0.0)) throw std::invalid_argument("resonator: loop radius must be positive");
  if (segments < 3) throw std::invalid_argument("resonator: need >= 3 segments");
  if (!(normal.norm() > 0.0)) throw std::invalid_argument("resonator: zero loop normal");

  const Eigen::Vector3d n = normal.normalized();
  const Eigen::Vector3d seed =
      std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d u = n.cross(seed).normalized();
  const Eigen::Vector3d v = n.cross(u);

  WireGeometry geom;
  geom.closed = true;
  geom.id = "loop";
  geom.points.reserve(static_cast<std::size_t>(segments));
  for (int k = 0; k < segments; ++k) {
    const double phi = 2.0 * M_PI * k / segments;
    geom.points.push_back(center + radius_m * (std::cos(phi) * u + std::sin(phi) * v));
  }
  return geom;
}

struct FieldMap {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> b_t;  // tesla; zero where singular
  std::vector<char> singular;        // grid point inside the wire
  std::string geometry_id;
};

namespace detail {

inline double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                     const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

} // namespace detail

/// Biot-Savart midpoint rule over every geometry: B(r) = (mu0 I / 4 pi)
/// sum dl x (r - m) / |r - m|^3. Points inside a wire are flagged singular
/// and left unevaluated.
inline FieldMap loop_field_map(const std::vector<WireGeometry>& geometries, double current_a,
                               const std::vector<Eigen::Vector3d>& grid) {
  if (!std::isfinite(current_a)) throw std::invalid_argument("resonator: non-finite current");
  if (geometries.empty()) throw std::invalid_argument("resonator: no geometry");
  for (const auto& g : geometries) g.validate();

  FieldMap map;
  map.points = grid;
  map.b_t.assign(grid.size(), Eigen::Vector3d::Zero());
  map.singular.assign(grid.size(), 0);
  for (const auto& g : geometries) {
    if (!map.geometry_id.empty()) map.geometry_id += "+";
    map.geometry_id += g.id;
  }

  const double prefactor = constants::mu0 * current_a / (4.0 * M_PI);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const Eigen::Vector3d& r = grid[gi];
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    bool singular = false;
    for (const auto& g : geometries) {
      const std::size_t n = g.points.size();
      const std::size_t nseg = g.closed ? n : n - 1;
      Eigen::Vector3d partial = Eigen::Vector3d::Zero();
      for (std::size_t k = 0; k < nseg && !singular; ++k) {
        const Eigen::Vector3d& a = g.points[k];
        const Eigen::Vector3d& c = g.points[(k + 1) % n];
        if (detail::point_segment_distance(r, a, c) <= g.wire_radius_m) {
          singular = true;
          break;
        }
        const Eigen::Vector3d dl = c - a;
        const Eigen::Vector3d rel = r - 0.5 * (a + c);
        const double dist = rel.norm();
        partial += dl.cross(rel) / (dist * dist * dist);
      }
      if (singular) break;
      // Scale per geometry so a multi-conductor map is bitwise the sum of
      // the single-conductor maps.
      b += prefactor * partial;
    }
    if (singular)
      map.singular[gi] = 1;
    else
      map.b_t[gi] = b;
  }
  return map;
}

inline FieldMap loop_field_map(const WireGeometry& geometry, double current_a,
                               const std::vector<Eigen::Vector3d>& grid) {
  return loop_field_map(std::vector<WireGeometry>{geometry}, current_a, grid);
}

/// A regular n x n lattice spanning +-half_extent along two in-plane axes.
inline std::vector<Eigen::Vector3d> planar_grid(const Eigen::Vector3d& center,
                                                const Eigen::Vector3d& axis_1,
                                                const Eigen::Vector3d& axis_2,
                                                double half_extent_m, int n) {
  if (n < 2) throw std::invalid_argument("resonator: grid needs n >= 2");
  if (!(half_extent_m > 0.0)) throw std::invalid_argument("resonator: non-positive extent");
  const Eigen::Vector3d e1 = axis_1.normalized();
  const Eigen::Vector3d e2 = axis_2.normalized();
  std::vector<Eigen::Vector3d> grid;
  grid.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double s = -half_extent_m + 2.0 * half_extent_m * i / (n - 1);
      const double t = -half_extent_m + 2.0 * half_extent_m * j / (n - 1);
      grid.push_back(center + s * e1 + t * e2);
    }
  return grid;
}

struct FieldMetrics {
  double mean_b_t = 0.0;
  double uniformity_pct = 0.0;       // (max - min) / (max + min) as +-%
  double gauss_per_sqrt_watt = 0.0;  // 0 when no drive power is given
};

/// Mean field magnitude and uniformity over `region` (indices into the
/// map); with `drive_power_w` > 0 also the efficiency in G/sqrt(W).
inline FieldMetrics field_metrics(const FieldMap& map, const std::vector<std::size_t>& region,
                                  double drive_power_w = 0.0) {
  if (region.empty()) throw std::invalid_argument("resonator: empty region");
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t idx : region) {
    if (idx >= map.points.size())
      throw std::invalid_argument("resonator: region index outside the map");
    if (map.singular[idx])
      throw std::invalid_argument("resonator: region contains singular points");
    const double mag = map.b_t[idx].norm();
    sum += mag;
    lo = std::min(lo, mag);
    hi = std::max(hi, mag);
  }
  FieldMetrics metrics;
  metrics.mean_b_t = sum / static_cast<double>(region.size());
  metrics.uniformity_pct = hi + lo > 0.0 ? 100.0 * (hi - lo) / (hi + lo) : 0.0;
  if (drive_power_w > 0.0)
    metrics.gauss_per_sqrt_watt = metrics.mean_b_t * 1e4 / std::sqrt(drive_power_w);
  return metrics;
}

/// CSV export: one row per grid point, full double precision.
inline std::string field_map_csv(const FieldMap& map) {
  std::ostringstream out;
  out << "x_m,y_m,z_m,bx_t,by_t,bz_t,singular\n";
  char row[256];
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    std::snprintf(row, sizeof row, "%.17e,%.17e,%.17e,%.17e,%.17e,%.17e,%d\n",
                  map.points[i].x(), map.points[i].y(), map.points[i].z(), map.b_t[i].x(),
                  map.b_t[i].y(), map.b_t[i].z(), static_cast<int>(map.singular[i]));
    out << row;
  }
  return out.str();
}

inline nlohmann::json field_metrics_json(const FieldMetrics& metrics) {
  return {{"mean_b_t", metrics.mean_b_t},
          {"uniformity_pct", metrics.uniformity_pct},
          {"gauss_per_sqrt_watt", metrics.gauss_per_sqrt_watt}};
}

/// Geometry from a JSON spec: {"type": "loop", "radius_m": .., "center":
/// [..], "normal": [..], "segments": ..} or {"type": "polyline", "points":
/// [[..], ..], "closed": ..}; both accept "wire_radius_m".
inline WireGeometry wire_geometry_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  auto vec3 = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 3)
      throw std::invalid_argument("resonator: vectors must be 3-element arrays");
    return Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  };

  WireGeometry geom;
  if (type == "loop") {
    const Eigen::Vector3d center = j.contains("center") ? vec3(j["center"])
                                                        : Eigen::Vector3d::Zero();
    const Eigen::Vector3d normal = j.contains("normal") ? vec3(j["normal"])
                                                        : Eigen::Vector3d::UnitZ();
    geom = circular_loop(j.at("radius_m").get<double>(), center, normal,
                         j.value("segments", 10'000));
  } else if (type == "polyline") {
    for (const auto& p : j.at("points")) geom.points.push_back(vec3(p));
    geom.closed = j.value("closed", false);
  } else {
    throw std::invalid_argument("resonator: unknown geometry type '" + type + "'");
  }
  if (j.contains("wire_radius_m")) geom.wire_radius_m = j["wire_radius_m"].get<double>();
  geom.validate();
  return geom;
}

} // namespace nvsim
