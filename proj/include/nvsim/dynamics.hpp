#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "nvsim/hamiltonian.hpp"
#include "nvsim/linalg.hpp"
#include "nvsim/optics.hpp"

namespace nvsim {

// Density-matrix evolution on the 9-level spin space: free precession,
// microwave pulses (multi-level rotating-wave or brute-force lab frame), and
// phenomenological T1 / T2* relaxation.

struct DensityMatrix {
  MatrixXc entries{MatrixXc::Zero(kSpinDim, kSpinDim)};

  static DensityMatrix pure(int ms, int mi) {
    DensityMatrix rho;
    const int i = basis_index(ms, mi);
    rho.entries(i, i) = 1.0;
    return rho;
  }

  /// Optically pumped state: electron in m_s = 0, nucleus fully mixed.
  static DensityMatrix ground_thermal() {
    DensityMatrix rho;
    for (int mi : {1, 0, -1}) rho.entries(basis_index(0, mi), basis_index(0, mi)) = 1.0 / 3.0;
    return rho;
  }

  double trace_real() const { return std::real(entries.trace()); }
  double purity() const { return std::real((entries * entries).trace()); }

  double population(int ms, int mi) const {
    const int i = basis_index(ms, mi);
    return std::real(entries(i, i));
  }

  /// Marginal electron population, summed over the nucleus.
  double electron_population(int ms) const {
    double p = 0.0;
    for (int mi : {1, 0, -1}) p += population(ms, mi);
    return p;
  }

  /// 3x3 nuclear marginal (partial trace over the electron).
  Matrix3c nuclear_marginal() const {
    Matrix3c m = Matrix3c::Zero();
    for (int e = 0; e < 3; ++e) m += entries.block<3, 3>(3 * e, 3 * e);
    return m;
  }

  void validate(bool check_positivity = true) const {
    if (std::abs(trace_real() - 1.0) > 1e-9)
      throw std::invalid_argument("dynamics: density matrix trace must be 1");
    if (hermiticity_error(entries) > 1e-10)
      throw std::invalid_argument("dynamics: density matrix must be Hermitian");
    if (check_positivity) {
      const auto eig = hermitian_eigensolve(entries, 1e-8);
      if (eig.values.minCoeff() < -1e-9)
        throw std::invalid_argument("dynamics: density matrix has negative eigenvalues");
    }
  }
};

enum class DriveMode { rwa, full };

struct DrivePulse {
  double carrier_hz = constants::default_d_gs;  // microwave frequency
  double rabi_hz = 1e6;                         // flop rate on the addressed line
  double phase_rad = 0.0;
  double duration_s = 0.0;
  Vector3d drive_axis = Vector3d::UnitX();      // MW field direction, NV frame

  void validate() const {
    if (!(duration_s >= 0.0)) throw std::invalid_argument("dynamics: pulse duration must be >= 0");
    if (!(rabi_hz >= 0.0)) throw std::invalid_argument("dynamics: rabi must be >= 0");
    if (!(carrier_hz > 0.0)) throw std::invalid_argument("dynamics: carrier must be positive");
    if (std::abs(drive_axis.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("dynamics: drive_axis must have unit norm");
  }
};

struct FullModeOptions {
  double steps_per_cycle = 50.0;  // lab-frame steps per carrier period
  double max_cycles = 1e7;        // cost guard on duration * carrier
};

struct RelaxationParams {
  double t1_s = 5e-3;        // longitudinal relaxation
  double t2_star_s = 1e-6;   // inhomogeneous dephasing (free precession)
  double t2_echo_s = 79e-6;  // echo envelope time constant
  double echo_exponent = 1.0;
  OpticalRates optical{};

  void validate() const {
    for (double v : {t1_s, t2_star_s, t2_echo_s, echo_exponent})
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("dynamics: relaxation times must be positive");
    if (t2_star_s > 2.0 * t1_s)
      throw std::invalid_argument("dynamics: t2_star must not exceed 2*t1");
    optical.validate();
  }
};

/// rho' = U rho U^dagger with U = exp(-i 2 pi H dt), from a precomputed
/// eigendecomposition of H (in Hz).
inline DensityMatrix evolve_unitary(const DensityMatrix& rho, const HermitianEigen& eig,
                                    double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("dynamics: dt must be >= 0");
  const MatrixXc u = unitary_propagator(eig, dt);
  return {(u * rho.entries * u.adjoint()).eval()};
}

inline DensityMatrix evolve_unitary(const DensityMatrix& rho, const SpinOperator& h,
                                    double dt) {
  rho.validate();
  return evolve_unitary(rho, hermitian_eigensolve(h.entries), dt);
}

namespace detail {

/// Excitation counter Sz^2 on the product space: 1 on m_s = +-1, 0 on m_s = 0.
inline const MatrixXc& excitation_projector() {
  static const MatrixXc p = (spin_basis_ops().sz * spin_basis_ops().sz).eval();
  return p;
}

/// Phase rotation R(t) = exp(+i 2 pi f t Sz^2), diagonal.
inline MatrixXc carrier_frame(double f_times_t) {
  MatrixXc r = MatrixXc::Identity(kSpinDim, kSpinDim);
  const double phi = 2.0 * M_PI * f_times_t;
  const Complex e(std::cos(phi), std::sin(phi));
  for (int i = 0; i < kSpinDim; ++i)
    if (std::real(excitation_projector()(i, i)) > 0.5) r(i, i) = e;
  return r;
}

/// Lab-frame drive operator A * (n . S), transverse part only, with the
/// amplitude A calibrated so a resonant pulse flops an isolated
/// |0> <-> |+-1> line at exactly `rabi`: the S=1 matrix element is 1/sqrt(2)
/// and only the transverse component of the MW field drives transitions.
inline MatrixXc drive_operator(const DrivePulse& pulse) {
  const double n_perp = std::hypot(pulse.drive_axis.x(), pulse.drive_axis.y());
  if (n_perp < 1e-9)
    throw std::invalid_argument("dynamics: drive_axis needs a transverse component");
  const double amp = std::sqrt(2.0) * pulse.rabi_hz / n_perp;
  const auto& ops = spin_basis_ops();
  return amp * (pulse.drive_axis.x() * ops.sx + pulse.drive_axis.y() * ops.sy);
}

inline DensityMatrix mw_pulse_rwa(const DensityMatrix& rho, const DrivePulse& pulse,
                                  const MatrixXc& h0) {
  // Frame rotating at the carrier via R(t) = exp(+i 2 pi f_c t Sz^2). The
  // co-rotating half of the cosine drive survives; counter-rotating terms and
  // the longitudinal drive component average out. Detunings of all nine
  // levels are kept, so off-resonant lines shift and leak realistically.
  const MatrixXc& proj = excitation_projector();
  const MatrixXc comp = MatrixXc::Identity(kSpinDim, kSpinDim) - proj;
  const MatrixXc t_raise = proj * drive_operator(pulse) * comp;
  const Complex ephase(std::cos(pulse.phase_rad), -std::sin(pulse.phase_rad));
  // Secular part of the static Hamiltonian: elements changing the excitation
  // number (e.g. hyperfine flip-flops) oscillate at the carrier in this frame
  // and must be dropped, or they would couple resonantly.
  MatrixXc h_rot = proj * h0 * proj + comp * h0 * comp - pulse.carrier_hz * proj;
  h_rot += 0.5 * (ephase * t_raise + std::conj(ephase) * t_raise.adjoint());

  const MatrixXc u_rot = unitary_propagator(hermitian_eigensolve(h_rot), pulse.duration_s);
  // Undo the frame at the end of the pulse so the caller stays in the lab frame.
  const MatrixXc u_lab = carrier_frame(pulse.carrier_hz * pulse.duration_s).adjoint() * u_rot;
  return {(u_lab * rho.entries * u_lab.adjoint()).eval()};
}

inline DensityMatrix mw_pulse_full(const DensityMatrix& rho, const DrivePulse& pulse,
                                   const MatrixXc& h0, const FullModeOptions& opts) {
  const double cycles = pulse.duration_s * pulse.carrier_hz;
  if (cycles > opts.max_cycles)
    throw std::runtime_error("dynamics: full-mode pulse exceeds the cycle budget");
  const double steps_per_cycle = std::max(opts.steps_per_cycle, 50.0);
  const long n_steps = std::max(1L, static_cast<long>(std::ceil(cycles * steps_per_cycle)));
  const double h = pulse.duration_s / n_steps;

  // Strang splitting exp(-i pi h H0) exp(-i 2 pi h g W) exp(-i pi h H0) with
  // the cosine sampled at midstep; both factors come from one-time
  // eigendecompositions, so each step is three small matrix products.
  const auto eig0 = hermitian_eigensolve(h0);
  const auto eigw = hermitian_eigensolve(drive_operator(pulse));
  const MatrixXc u_half = unitary_propagator(eig0, h / 2.0);

  MatrixXc u_total = MatrixXc::Identity(kSpinDim, kSpinDim);
  MatrixXc d = MatrixXc::Zero(kSpinDim, kSpinDim);
  for (long m = 0; m < n_steps; ++m) {
    const double t_mid = (m + 0.5) * h;
    const double g = std::cos(2.0 * M_PI * pulse.carrier_hz * t_mid + pulse.phase_rad);
    for (int k = 0; k < kSpinDim; ++k) {
      const double phi = -2.0 * M_PI * g * eigw.values(k) * h;
      d(k, k) = Complex(std::cos(phi), std::sin(phi));
    }
    u_total = u_half * (eigw.vectors * d * eigw.vectors.adjoint()) * u_half * u_total;
  }
  return {(u_total * rho.entries * u_total.adjoint()).eval()};
}

} // namespace detail

/// Apply one microwave pulse and return the lab-frame state at its end.
/// `rwa` keeps all nine levels with their detunings but drops counter-rotating
/// terms; `full` integrates the lab-frame cosine drive step by step.
inline DensityMatrix apply_mw_pulse(const DensityMatrix& rho, const DrivePulse& pulse,
                                    const NVParameters& params,
                                    DriveMode mode = DriveMode::rwa,
                                    const FullModeOptions& opts = {}) {
  pulse.validate();
  rho.validate();
  const MatrixXc h0 = build_hamiltonian(params).entries;
  if (mode == DriveMode::rwa) return detail::mw_pulse_rwa(rho, pulse, h0);
  return detail::mw_pulse_full(rho, pulse, h0, opts);
}

/// Phenomenological relaxation over an interval t: coherences between
/// different m_s decay as exp(-t/T2*); the electron populations relax toward
/// the uniform m_s mixture with rate 1/T1 (infinite-temperature limit),
/// leaving the nuclear marginal untouched. Exact semigroup: applying t1 then
/// t2 equals applying t1 + t2.
inline DensityMatrix apply_decoherence(const DensityMatrix& rho, double t,
                                       const RelaxationParams& relax) {
  if (!(t >= 0.0)) throw std::invalid_argument("dynamics: time must be >= 0");
  relax.validate();
  rho.validate(false);

  const double c = std::exp(-t / relax.t2_star_s);
  const double lambda = std::exp(-t / relax.t1_s);

  DensityMatrix out = rho;
  Matrix3c mean = Matrix3c::Zero();
  for (int e = 0; e < 3; ++e) mean += rho.entries.block<3, 3>(3 * e, 3 * e);
  mean /= 3.0;
  for (int e1 = 0; e1 < 3; ++e1)
    for (int e2 = 0; e2 < 3; ++e2) {
      auto block = out.entries.block<3, 3>(3 * e1, 3 * e2);
      if (e1 == e2)
        block = lambda * block + (1.0 - lambda) * mean;
      else
        block *= c;
    }
  return out;
}

/// Electron-spin marginal as occupations ordered {+1, 0, -1}, e.g. to seed the
/// optical rate model.
inline std::array<double, 3> electron_marginal(const DensityMatrix& rho) {
  return {rho.electron_population(1), rho.electron_population(0),
          rho.electron_population(-1)};
}

/// Rebuild a spin state from ground-triplet occupations, keeping a given
/// nuclear marginal and no electron coherence (laser windows destroy it).
inline DensityMatrix from_ground_populations(const std::array<double, 3>& ground,
                                             const Matrix3c& nuclear) {
  const double total = ground[0] + ground[1] + ground[2];
  const double ntr = std::real(nuclear.trace());
  if (!(total > 0.0) || !(ntr > 0.0))
    throw std::invalid_argument("dynamics: populations must have positive total");
  DensityMatrix rho;
  for (int e = 0; e < 3; ++e)
    rho.entries.block<3, 3>(3 * e, 3 * e) = (ground[e] / total / ntr) * nuclear;
  return rho;
}

} // namespace nvsim
