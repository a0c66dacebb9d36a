#pragma once

// Physical constants (SI). Values follow CODATA 2018 where the 2019 SI
// redefinition does not fix them exactly.

namespace nvsim::constants {

inline constexpr double planck = 6.62607015e-34;        // J s (exact)
inline constexpr double hbar = 1.054571817e-34;         // J s
inline constexpr double bohr_magneton = 9.2740100783e-24;   // J/T
inline constexpr double nuclear_magneton = 5.0507837461e-27; // J/T
inline constexpr double mu0 = 1.25663706212e-6;         // T m / A
inline constexpr double atomic_mass_unit = 1.66054e-27; // kg
inline constexpr double diamond_density = 3510.0;       // kg/m^3

// NV ground-state defaults. D, P and A_par are the commonly quoted values
// for the 14N NV- center; A_perp is not as well constrained and stays
// configurable on NVParameters.
inline constexpr double default_d_gs = 2.870e9;    // Hz
inline constexpr double default_p_quad = -4.95e6;  // Hz
inline constexpr double default_a_par = 2.16e6;    // Hz
inline constexpr double default_a_perp = -2.7e6;   // Hz
inline constexpr double default_g_s = 2.0028;
inline constexpr double g_i_14n = 0.403761;

} // namespace nvsim::constants
