#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nvsim/hamiltonian.hpp"
#include "nvsim/rng.hpp"

namespace nvsim {

/// Simulated ODMR record: normalized fluorescence vs microwave frequency.
struct Spectrum {
  std::vector<double> frequencies;  // Hz
  std::vector<double> values;       // normalized PL, in (0, 1.05]
  double linewidth_hz = 0.0;        // FWHM of each dip
  double contrast = 0.0;            // per-dip depth at unit amplitude
};

/// The four NV orientations of a single-crystal diamond, in the crystal frame.
inline const std::array<Vector3d, 4>& tetrahedral_axes() {
  static const std::array<Vector3d, 4> axes = [] {
    const double r = 1.0 / std::sqrt(3.0);
    return std::array<Vector3d, 4>{Vector3d(r, r, r), Vector3d(r, -r, -r),
                                   Vector3d(-r, r, -r), Vector3d(-r, -r, r)};
  }();
  return axes;
}

/// NVParameters for all four crystallographic orientations at a common field.
inline std::vector<NVParameters> bulk_orientations(NVParameters base) {
  std::vector<NVParameters> out;
  for (const auto& axis : tetrahedral_axes()) {
    base.nv_axis = axis;
    out.push_back(base);
  }
  return out;
}

namespace detail {

inline void accumulate_dips(std::vector<double>& depth, const std::vector<double>& grid,
                            const TransitionTable& table, double linewidth, double contrast) {
  const double hw = linewidth / 2.0;
  for (const auto& t : table) {
    const double d = contrast * t.amplitude;
    if (d <= 0.0) continue;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double df = grid[k] - t.frequency_hz;
      depth[k] += d * hw * hw / (df * df + hw * hw);
    }
  }
}

inline Spectrum finalize_spectrum(std::vector<double> grid, const std::vector<double>& depth,
                                  double linewidth, double contrast) {
  Spectrum s;
  s.values.resize(depth.size());
  for (std::size_t k = 0; k < depth.size(); ++k) {
    s.values[k] = 1.0 - depth[k];
    if (!(s.values[k] > 0.0 && s.values[k] <= 1.05))
      throw std::domain_error("spectrum: value outside (0, 1.05]; lower the contrast");
  }
  s.frequencies = std::move(grid);
  s.linewidth_hz = linewidth;
  s.contrast = contrast;
  return s;
}

} // namespace detail

/// CW ODMR model: unit baseline minus amplitude-weighted Lorentzian dips at
/// every allowed transition, averaged over the given orientations.
inline Spectrum odmr_spectrum(const std::vector<NVParameters>& orientations,
                              double linewidth_hz, double contrast,
                              const std::vector<double>& grid) {
  if (orientations.empty()) throw std::invalid_argument("spectrum: empty orientation list");
  if (grid.empty()) throw std::invalid_argument("spectrum: empty frequency grid");
  if (!(linewidth_hz > 0.0)) throw std::invalid_argument("spectrum: linewidth must be positive");
  if (!(contrast > 0.0 && contrast < 1.0))
    throw std::invalid_argument("spectrum: contrast must lie in (0, 1)");

  std::vector<double> depth(grid.size(), 0.0);
  for (const auto& params : orientations) {
    const auto table = transition_frequencies(eigensolve(build_hamiltonian(params)));
    detail::accumulate_dips(depth, grid, table, linewidth_hz, contrast);
  }
  for (auto& d : depth) d /= static_cast<double>(orientations.size());
  return detail::finalize_spectrum(grid, depth, linewidth_hz, contrast);
}

/// Orientation-averaged spectrum of an unoriented particle: the NV axis is
/// drawn uniformly on the sphere n_samples times and the single-orientation
/// spectra are averaged. Deterministic for a fixed seed.
inline Spectrum powder_spectrum(const NVParameters& params, int n_samples,
                                std::uint64_t rng_seed, double linewidth_hz,
                                double contrast, const std::vector<double>& grid) {
  if (n_samples < 1) throw std::invalid_argument("spectrum: n_samples must be >= 1");
  auto rng = make_rng(rng_seed);
  std::vector<double> depth(grid.size(), 0.0);
  NVParameters p = params;
  for (int s = 0; s < n_samples; ++s) {
    p.nv_axis = random_unit_vector(rng);
    const auto table = transition_frequencies(eigensolve(build_hamiltonian(p)));
    detail::accumulate_dips(depth, grid, table, linewidth_hz, contrast);
  }
  for (auto& d : depth) d /= static_cast<double>(n_samples);
  return detail::finalize_spectrum(grid, depth, linewidth_hz, contrast);
}

/// Evenly spaced frequency grid, endpoints included.
inline std::vector<double> frequency_grid(double from_hz, double to_hz, int points) {
  if (points < 2 || !(to_hz > from_hz))
    throw std::invalid_argument("spectrum: bad frequency grid");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i)
    g[i] = from_hz + (to_hz - from_hz) * i / (points - 1);
  return g;
}

} // namespace nvsim
