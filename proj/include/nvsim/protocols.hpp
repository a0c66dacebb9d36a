#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvsim/execute.hpp"
#include "nvsim/rng.hpp"
#include "nvsim/sequence.hpp"

namespace nvsim {

// Generators for the standard measurement protocols as sequence programs,
// plus runners that sweep, execute and photon-count them.

struct SweepRange {
  double start = 0.0;
  double stop = 0.0;
  int points = 0;
};

struct ProtocolConfig {
  double pump_s = 3e-6;        // initial polarization pulse
  double relax_wait_s = 1e-6;  // dark settling time after the pump
  double readout_s = 2e-6;     // readout laser pulse length
  double rabi_hz = 1e6;        // drive amplitude stamped on mw statements
};

namespace detail {

inline void check_range(const SweepRange& r, const char* what) {
  if (r.points < 2 || !(std::isfinite(r.start) && std::isfinite(r.stop)))
    throw std::invalid_argument(std::string("protocols: ") + what +
                                " needs a finite range with at least 2 points");
}

inline SweepDecl sweep_decl(const std::string& var, const SweepRange& r) {
  SweepDecl d;
  d.variable = var;
  d.start = r.start;
  d.stop = r.stop;
  d.points = r.points;
  return d;
}

inline Statement plain(StatementKind kind, double duration_s) {
  Statement s;
  s.kind = kind;
  s.duration = {duration_s, ""};
  return s;
}

inline Statement mw_stmt(const ScalarExpr& duration, PulseRole role, const ScalarExpr& freq,
                         double rabi_hz) {
  Statement s;
  s.kind = StatementKind::mw;
  s.duration = duration;
  s.role = role;
  s.frequency = freq;
  s.has_amplitude = true;
  s.amplitude = {rabi_hz, ""};
  return s;
}

inline ScalarExpr var(const std::string& name) { return {0.0, name}; }
inline ScalarExpr lit(double v) { return {v, ""}; }

} // namespace detail

/// Alternating illumination and drive, the sequential stand-in for true CW
/// operation, closed by a readout window.
inline SequenceProgram cw_odmr(const SweepRange& f_range, const ProtocolConfig& cfg = {}) {
  detail::check_range(f_range, "cw_odmr");
  SequenceProgram prog;
  prog.sweeps.push_back(detail::sweep_decl("f", f_range));
  RepeatBlock block;
  block.count = 10;
  block.body.push_back({detail::plain(StatementKind::laser, 1e-6)});
  block.body.push_back({detail::mw_stmt(detail::lit(1e-6), PulseRole::none, detail::var("f"),
                                        cfg.rabi_hz)});
  prog.items.push_back({std::move(block)});
  prog.items.push_back({detail::plain(StatementKind::readout, cfg.readout_s)});
  return prog;
}

/// Pump, settle, one pi pulse at the swept frequency, read.
inline SequenceProgram pulsed_odmr(const SweepRange& f_range, const ProtocolConfig& cfg = {}) {
  detail::check_range(f_range, "pulsed_odmr");
  SequenceProgram prog;
  prog.sweeps.push_back(detail::sweep_decl("f", f_range));
  prog.items.push_back({detail::plain(StatementKind::laser, cfg.pump_s)});
  prog.items.push_back({detail::plain(StatementKind::wait, cfg.relax_wait_s)});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::pi, detail::var("f"), cfg.rabi_hz)});
  prog.items.push_back({detail::plain(StatementKind::readout, cfg.readout_s)});
  return prog;
}

/// Pump, settle, drive for the swept duration, read.
inline SequenceProgram rabi(const SweepRange& dur_range, double frequency_hz,
                            const ProtocolConfig& cfg = {}) {
  detail::check_range(dur_range, "rabi");
  SequenceProgram prog;
  prog.sweeps.push_back(detail::sweep_decl("tau", dur_range));
  prog.items.push_back({detail::plain(StatementKind::laser, cfg.pump_s)});
  prog.items.push_back({detail::plain(StatementKind::wait, cfg.relax_wait_s)});
  prog.items.push_back({detail::mw_stmt(detail::var("tau"), PulseRole::none,
                                        detail::lit(frequency_hz), cfg.rabi_hz)});
  prog.items.push_back({detail::plain(StatementKind::readout, cfg.readout_s)});
  return prog;
}

/// pi/2 - swept free evolution - pi/2 at fixed frequency.
inline SequenceProgram ramsey_vs_time(const SweepRange& tau_range, double frequency_hz,
                                      const ProtocolConfig& cfg = {}) {
  detail::check_range(tau_range, "ramsey_vs_time");
  SequenceProgram prog;
  prog.sweeps.push_back(detail::sweep_decl("tau", tau_range));
  prog.items.push_back({detail::plain(StatementKind::laser, cfg.pump_s)});
  prog.items.push_back({detail::plain(StatementKind::wait, cfg.relax_wait_s)});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::half_pi, detail::lit(frequency_hz),
                                        cfg.rabi_hz)});
  Statement tau = detail::plain(StatementKind::wait, 0.0);
  tau.duration = detail::var("tau");
  prog.items.push_back({tau});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::half_pi, detail::lit(frequency_hz),
                                        cfg.rabi_hz)});
  prog.items.push_back({detail::plain(StatementKind::readout, cfg.readout_s)});
  return prog;
}

/// pi/2 - fixed free evolution - pi/2 at the swept frequency.
inline SequenceProgram ramsey_vs_freq(const SweepRange& f_range, double tau_s,
                                      const ProtocolConfig& cfg = {}) {
  detail::check_range(f_range, "ramsey_vs_freq");
  if (!(tau_s > 0.0)) throw std::invalid_argument("protocols: ramsey_vs_freq needs tau > 0");
  SequenceProgram prog;
  prog.sweeps.push_back(detail::sweep_decl("f", f_range));
  prog.items.push_back({detail::plain(StatementKind::laser, cfg.pump_s)});
  prog.items.push_back({detail::plain(StatementKind::wait, cfg.relax_wait_s)});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::half_pi, detail::var("f"), cfg.rabi_hz)});
  prog.items.push_back({detail::plain(StatementKind::wait, tau_s)});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::half_pi, detail::var("f"), cfg.rabi_hz)});
  prog.items.push_back({detail::plain(StatementKind::readout, cfg.readout_s)});
  return prog;
}

/// Pump, swept dark interval, read: population relaxation.
inline SequenceProgram t1(const SweepRange& tau_range, const ProtocolConfig& cfg = {}) {
  detail::check_range(tau_range, "t1");
  SequenceProgram prog;
  prog.sweeps.push_back(detail::sweep_decl("tau", tau_range));
  prog.items.push_back({detail::plain(StatementKind::laser, cfg.pump_s)});
  Statement tau = detail::plain(StatementKind::wait, 0.0);
  tau.duration = detail::var("tau");
  prog.items.push_back({tau});
  prog.items.push_back({detail::plain(StatementKind::readout, cfg.readout_s)});
  return prog;
}

/// pi/2 - tau - pi - tau - pi/2.
inline SequenceProgram hahn_echo(const SweepRange& tau_range, double frequency_hz,
                                 const ProtocolConfig& cfg = {}) {
  detail::check_range(tau_range, "hahn_echo");
  SequenceProgram prog;
  prog.sweeps.push_back(detail::sweep_decl("tau", tau_range));
  prog.items.push_back({detail::plain(StatementKind::laser, cfg.pump_s)});
  prog.items.push_back({detail::plain(StatementKind::wait, cfg.relax_wait_s)});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::half_pi, detail::lit(frequency_hz),
                                        cfg.rabi_hz)});
  Statement tau = detail::plain(StatementKind::wait, 0.0);
  tau.duration = detail::var("tau");
  prog.items.push_back({tau});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::pi, detail::lit(frequency_hz),
                                        cfg.rabi_hz)});
  prog.items.push_back({tau});
  prog.items.push_back({detail::mw_stmt({}, PulseRole::half_pi, detail::lit(frequency_hz),
                                        cfg.rabi_hz)});
  prog.items.push_back({detail::plain(StatementKind::readout, cfg.readout_s)});
  return prog;
}

struct RunOptions {
  CompileOptions compile{};
  ExecOptions exec{};
  double counts_window_s = 300e-9;  // head of the readout trace used for counting
  int shots = 0;                    // 0: noiseless expectation values only
  std::uint64_t seed = 0;
};

struct SweepRunResult {
  std::string variable;
  std::vector<double> x;               // sweep values
  std::vector<double> mean_counts;     // noiseless expected counts per shot
  std::vector<double> sampled_counts;  // Poisson sample mean (equals mean if shots == 0)
  std::uint64_t seed = 0;
};

/// Compile and execute a single-sweep program point by point, photon-counting
/// the head window of the last readout. Per-point RNG streams are derived
/// from the master seed, so point order cannot matter.
inline SweepRunResult run_swept(const SequenceProgram& program, const NVParameters& params,
                                const RelaxationParams& relax, const RunOptions& options = {},
                                const DensityMatrix& initial = DensityMatrix::ground_thermal()) {
  if (program.sweeps.size() != 1)
    throw std::invalid_argument("protocols: runner needs exactly one sweep variable");
  const auto& sw = program.sweeps[0];
  SweepRunResult out;
  out.variable = sw.variable;
  out.seed = options.seed;
  std::map<std::string, double> assignment;
  for (int k = 0; k < sw.points; ++k) {
    assignment[sw.variable] = SequenceProgram::sweep_value(sw, k);
    const Timeline timeline = compile(program, assignment, options.compile);
    const ExecResult res = execute(timeline, initial, params, relax, options.exec);
    if (res.readouts.empty() || res.readouts.back().times.empty())
      throw std::invalid_argument("protocols: program records no readout");
    const auto& trace = res.readouts.back();
    const double window = std::min(options.counts_window_s, trace.times.back());
    const auto counts =
        readout_counts(trace, 0.0, window, options.shots, mix_seed(options.seed, k));
    out.x.push_back(assignment[sw.variable]);
    out.mean_counts.push_back(counts.mean_counts);
    out.sampled_counts.push_back(options.shots > 0 ? counts.sample_mean : counts.mean_counts);
  }
  return out;
}

/// Hahn-echo runner. The dephasing channel here is memoryless, so the pulse
/// sequence alone cannot model the refocusing gain of a real echo; instead
/// the coherent part of the signal (isolated by phase cycling the closing
/// pi/2 pulse) is damped by the echo envelope exp(-(2 tau / t2_echo)^p).
inline SweepRunResult run_hahn_echo(const SweepRange& tau_range, double frequency_hz,
                                    const NVParameters& params, const RelaxationParams& relax,
                                    const RunOptions& options = {},
                                    const ProtocolConfig& cfg = {}) {
  RelaxationParams coherent = relax;
  coherent.t2_star_s = 2.0 * relax.t1_s;  // static dephasing refocused by the pi pulse

  SequenceProgram prog = hahn_echo(tau_range, frequency_hz, cfg);
  SequenceProgram flipped = prog;  // closing pi/2 phase-cycled by pi
  Statement* last_half_pi = nullptr;
  for (auto& item : flipped.items)
    if (auto* stmt = std::get_if<Statement>(&item.node))
      if (stmt->kind == StatementKind::mw && stmt->role == PulseRole::half_pi)
        last_half_pi = stmt;
  last_half_pi->has_phase = true;
  last_half_pi->phase = {M_PI, ""};

  const SweepRunResult plus = run_swept(prog, params, coherent, options);
  RunOptions alt = options;
  alt.seed = mix_seed(options.seed, 0x9e37ULL);
  const SweepRunResult minus = run_swept(flipped, params, coherent, alt);

  SweepRunResult out = plus;
  for (std::size_t k = 0; k < out.x.size(); ++k) {
    const double total = 2.0 * out.x[k];
    const double env = std::exp(-std::pow(total / relax.t2_echo_s, relax.echo_exponent));
    const double mixed = 0.5 * (plus.mean_counts[k] + minus.mean_counts[k]);
    out.mean_counts[k] = mixed + (plus.mean_counts[k] - mixed) * env;
    const double mixed_s = 0.5 * (plus.sampled_counts[k] + minus.sampled_counts[k]);
    out.sampled_counts[k] = mixed_s + (plus.sampled_counts[k] - mixed_s) * env;
  }
  return out;
}

} // namespace nvsim
