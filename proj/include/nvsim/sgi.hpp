#pragma once

// Stern-Gerlach interferometry estimates for a levitated nanodiamond
// carrying a single NV spin: arm trajectories under pulsed magnetic
// gradients, spatial splitting, loop closure and the coherence-limited
// fringe contrast. Everything is closed-form piecewise-quadratic motion;
// gravity and diamagnetic forces are common-mode for the splitting
// observable and deliberately excluded.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nvsim/constants.hpp"

namespace nvsim {

/// A nanodiamond characterised by its atom count.
struct NDSpec {
  double n_atoms = 0.0;
  double mass_kg = 0.0;
  double cube_edge_m = 0.0;        // edge of the equivalent cube
  double sphere_diameter_m = 0.0;  // diameter of the equivalent sphere
};

/// Mass and equivalent sizes of a pure-carbon nanodiamond with `n_atoms`
/// atoms at bulk diamond density.
inline NDSpec nd_from_atoms(double n_atoms) {
  if (!(n_atoms >= 1.0)) throw std::invalid_argument("sgi: need at least one atom");
  NDSpec nd;
  nd.n_atoms = n_atoms;
  nd.mass_kg = n_atoms * 12.0 * constants::atomic_mass_unit;
  const double volume = nd.mass_kg / constants::diamond_density;
  nd.cube_edge_m = std::cbrt(volume);
  nd.sphere_diameter_m = std::cbrt(6.0 * volume / M_PI);
  return nd;
}

/// Magnetic force on the spin magnetic moment, projected on the gradient
/// axis: a = m_s g_s mu_B (dB/dz) / m.
inline double spin_acceleration(const NDSpec& nd, double gradient_t_per_m, int m_s) {
  if (m_s < -1 || m_s > 1) throw std::invalid_argument("sgi: m_s must be -1, 0 or +1");
  if (!(nd.mass_kg > 0.0)) throw std::invalid_argument("sgi: non-positive mass");
  return static_cast<double>(m_s) * constants::default_g_s * constants::bohr_magneton *
         gradient_t_per_m / nd.mass_kg;
}

/// One piecewise-constant gradient pulse. The per-arm signs model gradient
/// polarity seen by each arm (all +1 for a common coil).
struct GradientSegment {
  double duration_s = 0.0;
  double gradient_t_per_m = 0.0;
  double sign_a = 1.0;
  double sign_b = 1.0;
};

struct GradientProfile {
  std::vector<GradientSegment> segments;
  double max_gradient_t_per_m = 1e6;

  void validate() const {
    if (segments.empty()) throw std::invalid_argument("sgi: empty gradient profile");
    for (const auto& seg : segments) {
      if (!(seg.duration_s > 0.0))
        throw std::invalid_argument("sgi: segment durations must be positive");
      if (!(std::abs(seg.gradient_t_per_m) <= max_gradient_t_per_m))
        throw std::invalid_argument("sgi: gradient magnitude exceeds the configured maximum");
    }
  }

  double total_duration() const {
    double total = 0.0;
    for (const auto& seg : segments) total += seg.duration_s;
    return total;
  }
};

/// The standard full-loop pulse scheme: accelerate for T/4, decelerate for
/// T/2, re-accelerate for T/4, realised as four equal quarters with the
/// gradient polarity flipped between the halves. Closes both position and
/// velocity exactly for any acceleration.
inline GradientProfile symmetric_profile(double gradient_t_per_m, double total_duration_s) {
  if (!(total_duration_s > 0.0))
    throw std::invalid_argument("sgi: total duration must be positive");
  const double quarter = total_duration_s / 4.0;
  GradientProfile profile;
  profile.segments = {{quarter, gradient_t_per_m},
                      {quarter, -gradient_t_per_m},
                      {quarter, -gradient_t_per_m},
                      {quarter, gradient_t_per_m}};
  return profile;
}

/// z(t) = z0 + v0 dt + a dt^2 / 2 on [t0, t0 + duration].
struct QuadSegment {
  double t0_s = 0.0;
  double duration_s = 0.0;
  double z0_m = 0.0;
  double v0_m_per_s = 0.0;
  double a_m_per_s2 = 0.0;
};

namespace detail {

/// Displacement over `dt` with a pinned evaluation order. The stepping and
/// the samplers share this expression so segment boundaries match bit for
/// bit, and the symmetric profile telescopes to exactly zero.
inline double quad_displacement(double v0, double a, double dt) {
  return (v0 * dt) + ((0.5 * a) * dt) * dt;
}

} // namespace detail

struct ArmTrajectory {
  int m_s = 0;
  std::vector<QuadSegment> segments;

  double position(double t) const {
    const QuadSegment& seg = locate(t);
    const double dt = std::clamp(t - seg.t0_s, 0.0, seg.duration_s);
    return seg.z0_m + detail::quad_displacement(seg.v0_m_per_s, seg.a_m_per_s2, dt);
  }

  double velocity(double t) const {
    const QuadSegment& seg = locate(t);
    const double dt = std::clamp(t - seg.t0_s, 0.0, seg.duration_s);
    return seg.v0_m_per_s + seg.a_m_per_s2 * dt;
  }

private:
  const QuadSegment& locate(double t) const {
    for (const auto& seg : segments)
      if (t < seg.t0_s + seg.duration_s) return seg;
    return segments.back();
  }
};

struct SGIOptions {
  double t2_s = 0.0;  // spin coherence time; 0 disables the contrast model
  double contrast_exponent = 1.0;
};

struct SGIResult {
  ArmTrajectory arm_a, arm_b;
  double total_duration_s = 0.0;
  double max_splitting_m = 0.0;
  double dz_final_m = 0.0;
  double dv_final_m_per_s = 0.0;
  double contrast = 1.0;
};

/// Spin-coherence-limited fringe contrast exp(-(T/T2)^p).
inline double contrast_estimate(double total_duration_s, double t2_s, double exponent = 1.0) {
  if (!(t2_s > 0.0)) throw std::invalid_argument("sgi: T2 must be positive");
  if (!(total_duration_s >= 0.0)) throw std::invalid_argument("sgi: negative duration");
  return std::exp(-std::pow(total_duration_s / t2_s, exponent));
}

namespace detail {

inline ArmTrajectory integrate_arm(const NDSpec& nd, const GradientProfile& profile, int m_s,
                                   bool arm_b) {
  ArmTrajectory arm;
  arm.m_s = m_s;
  double t = 0.0, z = 0.0, v = 0.0;
  for (const auto& seg : profile.segments) {
    const double sign = arm_b ? seg.sign_b : seg.sign_a;
    const double a = sign * spin_acceleration(nd, seg.gradient_t_per_m, m_s);
    arm.segments.push_back({t, seg.duration_s, z, v, a});
    z = z + quad_displacement(v, a, seg.duration_s);
    v = v + a * seg.duration_s;
    t += seg.duration_s;
  }
  return arm;
}

} // namespace detail

/// Integrate both arms through the gradient profile (exactly, segment by
/// segment) and report the maximum spatial splitting, the final
/// position/velocity gaps and -- when SGIOptions carries a T2 -- the
/// coherence-limited contrast.
inline SGIResult simulate_interferometer(const NDSpec& nd, const GradientProfile& profile,
                                         std::pair<int, int> arms,
                                         const SGIOptions& options = {}) {
  profile.validate();
  SGIResult result;
  result.arm_a = detail::integrate_arm(nd, profile, arms.first, false);
  result.arm_b = detail::integrate_arm(nd, profile, arms.second, true);
  result.total_duration_s = profile.total_duration();

  // The arm separation is piecewise quadratic too; its extrema sit at
  // segment boundaries or at an interior stationary point.
  double max_split = 0.0;
  for (std::size_t k = 0; k < result.arm_a.segments.size(); ++k) {
    const QuadSegment& sa = result.arm_a.segments[k];
    const QuadSegment& sb = result.arm_b.segments[k];
    const double dz0 = sb.z0_m - sa.z0_m;
    const double dv0 = sb.v0_m_per_s - sa.v0_m_per_s;
    const double da = sb.a_m_per_s2 - sa.a_m_per_s2;
    const double tau = sa.duration_s;
    max_split = std::max(max_split, std::abs(dz0));
    max_split = std::max(
        max_split, std::abs(dz0 + detail::quad_displacement(dv0, da, tau)));
    if (da != 0.0) {
      const double t_star = -dv0 / da;
      if (t_star > 0.0 && t_star < tau)
        max_split = std::max(
            max_split, std::abs(dz0 + detail::quad_displacement(dv0, da, t_star)));
    }
  }
  result.max_splitting_m = max_split;

  const QuadSegment& last_a = result.arm_a.segments.back();
  const QuadSegment& last_b = result.arm_b.segments.back();
  const double za_end = last_a.z0_m + detail::quad_displacement(last_a.v0_m_per_s,
                                                               last_a.a_m_per_s2,
                                                               last_a.duration_s);
  const double zb_end = last_b.z0_m + detail::quad_displacement(last_b.v0_m_per_s,
                                                               last_b.a_m_per_s2,
                                                               last_b.duration_s);
  result.dz_final_m = zb_end - za_end;
  result.dv_final_m_per_s = (last_b.v0_m_per_s + last_b.a_m_per_s2 * last_b.duration_s) -
                            (last_a.v0_m_per_s + last_a.a_m_per_s2 * last_a.duration_s);

  result.contrast =
      options.t2_s > 0.0
          ? contrast_estimate(result.total_duration_s, options.t2_s, options.contrast_exponent)
          : 1.0;
  return result;
}

/// JSON export with trajectories sampled on a uniform grid.
inline nlohmann::json sgi_result_json(const SGIResult& result, int samples = 129) {
  if (samples < 2) throw std::invalid_argument("sgi: need at least two samples");
  auto arm_json = [](const ArmTrajectory& arm) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : arm.segments)
      segs.push_back({{"t0_s", s.t0_s},
                      {"duration_s", s.duration_s},
                      {"z0_m", s.z0_m},
                      {"v0_m_per_s", s.v0_m_per_s},
                      {"a_m_per_s2", s.a_m_per_s2}});
    return nlohmann::json{{"m_s", arm.m_s}, {"segments", std::move(segs)}};
  };

  std::vector<double> t(static_cast<std::size_t>(samples));
  std::vector<double> za(t.size()), zb(t.size()), va(t.size()), vb(t.size());
  for (int i = 0; i < samples; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    t[iu] = result.total_duration_s * i / (samples - 1);
    za[iu] = result.arm_a.position(t[iu]);
    zb[iu] = result.arm_b.position(t[iu]);
    va[iu] = result.arm_a.velocity(t[iu]);
    vb[iu] = result.arm_b.velocity(t[iu]);
  }

  return {{"schema_version", 1},
          {"total_duration_s", result.total_duration_s},
          {"max_splitting_m", result.max_splitting_m},
          {"closure", {{"dz_final_m", result.dz_final_m},
                       {"dv_final_m_per_s", result.dv_final_m_per_s}}},
          {"contrast", result.contrast},
          {"arm_a", arm_json(result.arm_a)},
          {"arm_b", arm_json(result.arm_b)},
          {"samples", {{"t_s", t},
                       {"z_a_m", za},
                       {"z_b_m", zb},
                       {"v_a_m_per_s", va},
                       {"v_b_m_per_s", vb}}}};
}

} // namespace nvsim
