#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nvsim/constants.hpp"
#include "nvsim/linalg.hpp"

namespace nvsim {

// The NV ground-state spin system: electron S=1 coupled to the 14N nucleus
// I=1. Everything lives in the 9-dimensional product basis |m_s, m_I> with
// m_s, m_I in {+1, 0, -1}, index = 3*(1 - m_s) + (1 - m_I). Hamiltonians are
// stored in Hz (energy / h), matching how the constants are usually quoted.

inline constexpr int kSpinDim = 9;

constexpr int basis_index(int ms, int mi) { return 3 * (1 - ms) + (1 - mi); }

struct NVParameters {
  double d_gs = constants::default_d_gs;      // zero-field splitting, Hz
  double e_strain = 0.0;                      // transverse strain E, Hz
  double p_quad = constants::default_p_quad;  // nuclear quadrupole P, Hz
  double a_par = constants::default_a_par;    // axial hyperfine, Hz
  double a_perp = constants::default_a_perp;  // transverse hyperfine, Hz
  double g_s = constants::default_g_s;
  double g_i = constants::g_i_14n;
  Vector3d b_field = Vector3d::Zero();        // lab frame, tesla
  Vector3d nv_axis = Vector3d(0, 0, 1);       // lab frame, unit

  /// Electron gyromagnetic ratio g_s mu_B / h in Hz per tesla.
  double gamma_e_hz_per_t() const { return g_s * constants::bohr_magneton / constants::planck; }

  void validate() const {
    if (std::abs(nv_axis.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("hamiltonian: nv_axis must have unit norm");
    if (!(d_gs > 0.0)) throw std::invalid_argument("hamiltonian: d_gs must be positive");
    for (double v : {d_gs, e_strain, p_quad, a_par, a_perp, g_s, g_i,
                     b_field.x(), b_field.y(), b_field.z()})
      if (!std::isfinite(v)) throw std::invalid_argument("hamiltonian: non-finite parameter");
  }
};

/// Hermitian operator on the 9-dimensional spin space.
struct SpinOperator {
  MatrixXc entries{MatrixXc::Zero(kSpinDim, kSpinDim)};
};

namespace detail {

struct SpinBasisOps {
  MatrixXc sx, sy, sz;  // electron operators on the product space
  MatrixXc ix, iy, iz;  // nuclear operators on the product space
};

inline const SpinBasisOps& spin_basis_ops() {
  static const SpinBasisOps ops = [] {
    const MatrixXc id = MatrixXc::Identity(3, 3);
    SpinBasisOps o;
    o.sx = kron(spin1_x(), id);
    o.sy = kron(spin1_y(), id);
    o.sz = kron(spin1_z(), id);
    o.ix = kron(id, spin1_x());
    o.iy = kron(id, spin1_y());
    o.iz = kron(id, spin1_z());
    return o;
  }();
  return ops;
}

/// Orthonormal body triad with z along the NV axis. The transverse axes are
/// fixed by a deterministic convention (strain axes are not configurable).
inline std::array<Vector3d, 3> body_frame(const Vector3d& axis) {
  Vector3d ref = Vector3d::UnitX();
  if (std::abs(axis.x()) > std::abs(axis.y())) ref = Vector3d::UnitY();
  Vector3d x = (ref - ref.dot(axis) * axis).normalized();
  Vector3d y = axis.cross(x);
  return {x, y, axis};
}

} // namespace detail

/// H = H_S + H_I + H_SI in Hz, with the magnetic field expressed in the NV
/// body frame (z parallel to nv_axis):
///   H_S  = D_gs Sz^2 + E (Sy^2 - Sx^2) + (g_s mu_B / h) B . S
///   H_I  = P Iz^2 - (g_I mu_N / h) B . I
///   H_SI = A_par Sz Iz + A_perp (Sx Ix + Sy Iy)
inline SpinOperator build_hamiltonian(const NVParameters& params) {
  params.validate();
  const auto& ops = detail::spin_basis_ops();
  const auto frame = detail::body_frame(params.nv_axis);
  const Vector3d b(frame[0].dot(params.b_field), frame[1].dot(params.b_field),
                   frame[2].dot(params.b_field));

  const double gamma_e = params.gamma_e_hz_per_t();
  const double gamma_n = params.g_i * constants::nuclear_magneton / constants::planck;

  MatrixXc h = params.d_gs * (ops.sz * ops.sz).eval();
  h += params.e_strain * (ops.sy * ops.sy - ops.sx * ops.sx);
  h += gamma_e * (b.x() * ops.sx + b.y() * ops.sy + b.z() * ops.sz);
  h += params.p_quad * (ops.iz * ops.iz).eval();
  h -= gamma_n * (b.x() * ops.ix + b.y() * ops.iy + b.z() * ops.iz);
  h += params.a_par * (ops.sz * ops.iz).eval();
  h += params.a_perp * (ops.sx * ops.ix + ops.sy * ops.iy);
  return {std::move(h)};
}

struct EnergyLevels {
  Eigen::VectorXd frequencies;              // Hz, ascending
  MatrixXc states;                          // eigenvectors as columns
  std::array<std::pair<int, int>, 9> labels; // dominant (m_s, m_I) per level
};

/// Diagonalize a spin operator and label each level by the product basis
/// state with the largest overlap (lowest basis index wins ties).
inline EnergyLevels eigensolve(const SpinOperator& h) {
  const auto eig = hermitian_eigensolve(h.entries);
  EnergyLevels out;
  out.frequencies = eig.values;
  out.states = eig.vectors;
  for (int k = 0; k < kSpinDim; ++k) {
    int best = 0;
    double best_w = -1.0;
    for (int i = 0; i < kSpinDim; ++i) {
      const double w = std::norm(eig.vectors(i, k));
      if (w > best_w + 1e-15) {
        best_w = w;
        best = i;
      }
    }
    out.labels[k] = {1 - best / 3, 1 - best % 3};
  }
  return out;
}

struct Transition {
  double frequency_hz = 0.0;
  std::pair<int, int> lower;  // (m_s, m_I) label of the lower level
  std::pair<int, int> upper;
  double amplitude = 0.0;     // relative, max-normalized to 1
};

using TransitionTable = std::vector<Transition>;

/// Electron spin transitions: pairs of levels whose dominant labels differ by
/// |Delta m_s| = 1 at equal m_I. The relative amplitude is the
/// polarization-averaged transverse matrix element |<u|Sx|l>|^2 + |<u|Sy|l>|^2,
/// normalized so the strongest transition has amplitude 1.
inline TransitionTable transition_frequencies(const EnergyLevels& levels) {
  const auto& ops = detail::spin_basis_ops();
  TransitionTable table;
  double max_amp = 0.0;
  for (int i = 0; i < kSpinDim; ++i) {
    for (int j = i + 1; j < kSpinDim; ++j) {
      const auto [ms_l, mi_l] = levels.labels[i];
      const auto [ms_u, mi_u] = levels.labels[j];
      if (std::abs(ms_u - ms_l) != 1 || mi_u != mi_l) continue;
      const Vector9c lo = levels.states.col(i);
      const Vector9c up = levels.states.col(j);
      const double amp = std::norm(up.dot(ops.sx * lo)) + std::norm(up.dot(ops.sy * lo));
      max_amp = std::max(max_amp, amp);
      table.push_back({levels.frequencies(j) - levels.frequencies(i),
                       {ms_l, mi_l}, {ms_u, mi_u}, amp});
    }
  }
  if (max_amp > 0.0)
    for (auto& t : table) t.amplitude /= max_amp;
  std::stable_sort(table.begin(), table.end(), [](const Transition& a, const Transition& b) {
    return a.frequency_hz < b.frequency_hz;
  });
  return table;
}

} // namespace nvsim
