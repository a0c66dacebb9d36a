#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nvsim/rng.hpp"

namespace nvsim {

// Classical rate-equation model of the 532 nm pump / readout cycle over seven
// levels: the ground and excited spin triplets plus the metastable singlet
// shelf. Pumping and fluorescence are spin-conserving; the intersystem
// crossing is strongly spin-dependent, which is what makes m_s = 0 bright and
// feeds the optical repolarization into m_s = 0.

struct OpticalRates {
  double pump_rate = 3.0e7;              // ground -> excited, set by laser power
  double radiative_rate = 1.0 / 12e-9;   // excited -> ground fluorescence
  double isc_ms1 = 6.0e7;                // excited m_s = +-1 -> singlet
  double isc_ms0 = 1.0e6;                // excited m_s = 0 -> singlet
  double singlet_rate = 1.0 / 300e-9;    // singlet shelf decay
  double singlet_branch_ms0 = 0.9;       // fraction of singlet decay into m_s = 0
  double collection_efficiency = 0.1;    // detected fraction of emitted photons

  double max_rate() const {
    return std::max({pump_rate + radiative_rate + isc_ms1,
                     pump_rate + radiative_rate + isc_ms0, singlet_rate});
  }

  void validate() const {
    for (double r : {pump_rate, radiative_rate, isc_ms1, isc_ms0, singlet_rate,
                     collection_efficiency})
      if (!(r >= 0.0) || !std::isfinite(r))
        throw std::invalid_argument("optics: rates must be finite and non-negative");
    if (!(singlet_branch_ms0 >= 0.0 && singlet_branch_ms0 <= 1.0))
      throw std::invalid_argument("optics: singlet_branch_ms0 must be in [0, 1]");
  }
};

/// Occupations ordered ground {+1, 0, -1}, excited {+1, 0, -1}, singlet.
using Level7 = std::array<double, 7>;

inline constexpr int kGround0 = 1;
inline constexpr int kSinglet = 6;

struct SignalTrace {
  std::vector<double> times;   // seconds, ascending
  std::vector<double> values;  // detected photon rate, counts/s
  std::uint64_t rng_seed = 0;  // seed used if shot noise was applied downstream
};

namespace detail {

inline Level7 rate_derivative(const Level7& p, const OpticalRates& r) {
  const double isc[3] = {r.isc_ms1, r.isc_ms0, r.isc_ms1};
  const double branch[3] = {(1.0 - r.singlet_branch_ms0) / 2.0, r.singlet_branch_ms0,
                            (1.0 - r.singlet_branch_ms0) / 2.0};
  Level7 d{};
  double into_singlet = 0.0;
  for (int m = 0; m < 3; ++m) {
    d[m] = -r.pump_rate * p[m] + r.radiative_rate * p[3 + m] +
           r.singlet_rate * branch[m] * p[kSinglet];
    d[3 + m] = r.pump_rate * p[m] - (r.radiative_rate + isc[m]) * p[3 + m];
    into_singlet += isc[m] * p[3 + m];
  }
  d[kSinglet] = into_singlet - r.singlet_rate * p[kSinglet];
  return d;
}

inline double excited_sum(const Level7& p) { return p[3] + p[4] + p[5]; }

} // namespace detail

/// Integrate the rate equations for `duration` with a fixed classical
/// fourth-order step of at most `dt`, recording the detected emission rate at
/// every grid point (including t = 0). The linear conservation law (total
/// occupation) is preserved exactly by the explicit stepper.
inline std::pair<Level7, SignalTrace> optical_cycle(const Level7& populations,
                                                    const OpticalRates& rates,
                                                    double duration, double dt) {
  rates.validate();
  if (!(duration >= 0.0) || !(dt > 0.0) || dt > duration)
    throw std::invalid_argument("optics: need 0 < dt <= duration");
  double sum = 0.0;
  for (double p : populations) {
    if (!(p >= -1e-12)) throw std::invalid_argument("optics: negative occupation");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("optics: occupations must sum to 1");

  const int n_steps = std::max<int>(1, static_cast<int>(std::ceil(duration / dt - 1e-12)));
  const double h = duration / n_steps;
  if (h * rates.max_rate() > 0.1)
    throw std::runtime_error("optics: step too large for the fastest rate (reduce dt)");

  Level7 p = populations;
  SignalTrace trace;
  trace.times.reserve(n_steps + 1);
  trace.values.reserve(n_steps + 1);
  const double gain = rates.radiative_rate * rates.collection_efficiency;
  trace.times.push_back(0.0);
  trace.values.push_back(gain * detail::excited_sum(p));

  for (int step = 0; step < n_steps; ++step) {
    const Level7 k1 = detail::rate_derivative(p, rates);
    Level7 tmp;
    for (int i = 0; i < 7; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
    const Level7 k2 = detail::rate_derivative(tmp, rates);
    for (int i = 0; i < 7; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
    const Level7 k3 = detail::rate_derivative(tmp, rates);
    for (int i = 0; i < 7; ++i) tmp[i] = p[i] + h * k3[i];
    const Level7 k4 = detail::rate_derivative(tmp, rates);
    for (int i = 0; i < 7; ++i)
      p[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    trace.times.push_back((step + 1) * h);
    trace.values.push_back(gain * detail::excited_sum(p));
  }
  return {p, trace};
}

/// Fold excited and singlet occupations back into the ground triplet:
/// radiative decay is spin-conserving, the singlet branches per the rates.
/// Used to close out a laser window before subsequent dark evolution.
inline std::array<double, 3> collapse_to_ground(const Level7& p, const OpticalRates& r) {
  const double branch[3] = {(1.0 - r.singlet_branch_ms0) / 2.0, r.singlet_branch_ms0,
                            (1.0 - r.singlet_branch_ms0) / 2.0};
  std::array<double, 3> g{};
  for (int m = 0; m < 3; ++m) g[m] = p[m] + p[3 + m] + branch[m] * p[kSinglet];
  return g;
}

struct ReadoutCounts {
  double mean_counts = 0.0;        // expected counts: integral of the trace
  std::vector<long> samples;       // one Poisson draw per shot
  double sample_mean = 0.0;
  std::uint64_t rng_seed = 0;
};

namespace detail {

/// Trapezoid integral of a sampled trace over [t_a, t_b], linearly
/// interpolating the rate at the window edges.
inline double integrate_trace(const SignalTrace& trace, double t_a, double t_b) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < trace.times.size(); ++k) {
    const double lo = std::max(trace.times[k], t_a);
    const double hi = std::min(trace.times[k + 1], t_b);
    if (hi <= lo) continue;
    const double span = trace.times[k + 1] - trace.times[k];
    auto value_at = [&](double t) {
      const double w = span > 0.0 ? (t - trace.times[k]) / span : 0.0;
      return (1.0 - w) * trace.values[k] + w * trace.values[k + 1];
    };
    acc += 0.5 * (value_at(lo) + value_at(hi)) * (hi - lo);
  }
  return acc;
}

} // namespace detail

/// Photon counting over a window of the trace: expected counts are the
/// integrated rate, per-shot samples are Poisson draws from that mean,
/// reproducible under a fixed seed.
inline ReadoutCounts readout_counts(const SignalTrace& trace, double t_a, double t_b,
                                    int shots, std::uint64_t rng_seed) {
  if (trace.times.size() < 2) throw std::invalid_argument("optics: trace too short");
  if (!(t_b > t_a)) throw std::invalid_argument("optics: empty readout window");
  const double eps = 1e-12 * std::max(1.0, std::abs(trace.times.back()));
  if (t_a < trace.times.front() - eps || t_b > trace.times.back() + eps)
    throw std::invalid_argument("optics: readout window outside trace support");
  if (shots < 0) throw std::invalid_argument("optics: negative shot count");

  ReadoutCounts out;
  out.rng_seed = rng_seed;
  out.mean_counts = detail::integrate_trace(trace, t_a, t_b);
  auto rng = make_rng(rng_seed);
  std::poisson_distribution<long> poisson(out.mean_counts);
  out.samples.resize(shots);
  double sum = 0.0;
  for (int s = 0; s < shots; ++s) {
    out.samples[s] = out.mean_counts > 0.0 ? poisson(rng) : 0;
    sum += out.samples[s];
  }
  out.sample_mean = shots > 0 ? sum / shots : 0.0;
  return out;
}

} // namespace nvsim
