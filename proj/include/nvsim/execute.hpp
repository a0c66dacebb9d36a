#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nvsim/dynamics.hpp"
#include "nvsim/sequence.hpp"

namespace nvsim {

// Timeline execution: threads one density matrix through the events in order.
// Laser and readout windows run the classical optical cycle on the electron
// marginal and quench electron coherence at the pump rate; microwave windows
// apply pulses with a phase-continuous carrier; waits free-evolve and relax.
//
// Modeling note: residual excited/singlet population at the end of a laser
// window is folded straight back into the ground triplet, which assumes the
// following dark interval is long against the optical lifetimes (true for the
// protocols here, where dark gaps are >= 1 us).

struct ExecCheckpoint {
  std::size_t event_index = 0;
  const TimelineEvent* event = nullptr;
  const DensityMatrix* state = nullptr;
  const Level7* optical = nullptr;  // set for laser/readout events
};

using ExecObserver = std::function<void(const ExecCheckpoint&)>;

struct ExecOptions {
  DriveMode mode = DriveMode::rwa;
  FullModeOptions full{};
  double optical_dt = 5e-10;  // rate-equation step inside laser windows
  ExecObserver observer;      // called after every event
};

struct ExecResult {
  DensityMatrix final_state;
  std::vector<SignalTrace> readouts;  // one per readout event, local time axis
};

namespace detail {

/// One laser-on interval: evolve the optical populations, then rebuild the
/// spin state with rescaled m_s manifolds (nuclear structure preserved) and
/// laser-quenched electron coherences.
inline DensityMatrix laser_window(const DensityMatrix& rho, double duration,
                                  const HermitianEigen& eig0, const RelaxationParams& relax,
                                  double dt, SignalTrace* trace_out, Level7* optical_out) {
  DensityMatrix evolved = evolve_unitary(rho, eig0, duration);

  Level7 p{};
  const auto marginal = electron_marginal(evolved);
  for (int e = 0; e < 3; ++e) p[e] = marginal[e];
  const auto [p_final, trace] =
      optical_cycle(p, relax.optical, duration, std::min(dt, duration));
  const auto ground = collapse_to_ground(p_final, relax.optical);

  const double quench = std::exp(-relax.optical.pump_rate * duration);
  const Matrix3c nuclear = evolved.nuclear_marginal();
  DensityMatrix out = evolved;
  for (int e1 = 0; e1 < 3; ++e1)
    for (int e2 = 0; e2 < 3; ++e2) {
      auto block = out.entries.block<3, 3>(3 * e1, 3 * e2);
      if (e1 == e2) {
        if (marginal[e1] > 1e-12)
          block *= ground[e1] / marginal[e1];
        else
          block = ground[e1] * nuclear;  // manifold was empty: refill thermally
      } else {
        block *= quench;
      }
    }
  if (trace_out) *trace_out = trace;
  if (optical_out) *optical_out = p_final;
  return out;
}

} // namespace detail

inline ExecResult execute(const Timeline& timeline, const DensityMatrix& initial,
                          const NVParameters& params, const RelaxationParams& relax,
                          const ExecOptions& options = {}) {
  params.validate();
  relax.validate();
  initial.validate();
  const auto eig0 = hermitian_eigensolve(build_hamiltonian(params).entries);

  ExecResult result;
  DensityMatrix rho = initial;
  Level7 optical{};
  for (std::size_t i = 0; i < timeline.events.size(); ++i) {
    const auto& ev = timeline.events[i];
    const double dur = ev.duration();
    bool optical_fresh = false;
    switch (ev.channel) {
      case StatementKind::wait:
        if (dur > 0.0) {
          rho = evolve_unitary(rho, eig0, dur);
          rho = apply_decoherence(rho, dur, relax);
        }
        break;
      case StatementKind::mw:
        if (dur > 0.0) {
          DrivePulse pulse;
          pulse.carrier_hz = ev.frequency_hz;
          pulse.rabi_hz = ev.rabi_hz;
          pulse.duration_s = dur;
          // Phase-continuous local oscillator: the carrier phase at the event
          // start adds to the programmed offset, so separated pulses
          // interfere at the detuning (Ramsey fringes).
          const double cycles = ev.frequency_hz * 1e-9 * static_cast<double>(ev.start_ns);
          pulse.phase_rad = ev.phase_rad + 2.0 * M_PI * (cycles - std::floor(cycles));
          rho = apply_mw_pulse(rho, pulse, params, options.mode, options.full);
        }
        break;
      case StatementKind::laser:
      case StatementKind::readout: {
        SignalTrace trace;
        if (dur > 0.0) {
          rho = detail::laser_window(rho, dur, eig0, relax, options.optical_dt,
                                     ev.channel == StatementKind::readout ? &trace : nullptr,
                                     &optical);
          optical_fresh = true;
        }
        if (ev.channel == StatementKind::readout) result.readouts.push_back(std::move(trace));
        break;
      }
    }
    if (options.observer) {
      ExecCheckpoint cp;
      cp.event_index = i;
      cp.event = &ev;
      cp.state = &rho;
      cp.optical = optical_fresh ? &optical : nullptr;
      options.observer(cp);
    }
  }
  result.final_state = rho;
  return result;
}

} // namespace nvsim
