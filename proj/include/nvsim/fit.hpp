#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nvsim/fft.hpp"
#include "nvsim/linalg.hpp"

namespace nvsim {

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with numeric
// Jacobians, plus the measurement models used throughout: multi-Lorentzian
// dip spectra, the three-cosine Ramsey decay, plain exponential decay, and a
// damped sinusoid.
//
// Parameter layouts (all frequencies Hz, times s, phases rad):
//   lorentzian_multi(n): [baseline, (center_i, fwhm_i, depth_i) x n]
//   ramsey_3cos:         [A, B, T2*, f1, f2, f3, phi1, phi2, phi3]
//                        value = A + B e^{-t/T2*} sum_k cos(2 pi f_k t + phi_k)
//   exp_decay:           [amplitude, T, offset]
//   damped_sin:          [amplitude, T, frequency, phase, offset]

enum class FitModelId { lorentzian_multi, ramsey_3cos, exp_decay, damped_sin };

struct UnderDeterminedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitModel {
  FitModelId id = FitModelId::exp_decay;
  int dips = 1;                  // lorentzian_multi only
  bool poisson_weights = false;  // weight residuals by 1/max(y, 1) for count data
  std::vector<double> lower, upper;

  static FitModel lorentzian_multi(int n) {
    FitModel m;
    m.id = FitModelId::lorentzian_multi;
    m.dips = n;
    m.default_bounds();
    return m;
  }
  static FitModel ramsey_3cos() {
    FitModel m;
    m.id = FitModelId::ramsey_3cos;
    m.default_bounds();
    return m;
  }
  static FitModel exp_decay() {
    FitModel m;
    m.id = FitModelId::exp_decay;
    m.default_bounds();
    return m;
  }
  static FitModel damped_sin() {
    FitModel m;
    m.id = FitModelId::damped_sin;
    m.default_bounds();
    return m;
  }

  int parameter_count() const {
    switch (id) {
      case FitModelId::lorentzian_multi: return 1 + 3 * dips;
      case FitModelId::ramsey_3cos: return 9;
      case FitModelId::exp_decay: return 3;
      case FitModelId::damped_sin: return 5;
    }
    return 0;
  }

  const char* name() const {
    switch (id) {
      case FitModelId::lorentzian_multi: return "lorentzian_multi";
      case FitModelId::ramsey_3cos: return "ramsey_3cos";
      case FitModelId::exp_decay: return "exp_decay";
      case FitModelId::damped_sin: return "damped_sin";
    }
    return "?";
  }

  /// Free bounds except for the time constants and widths, which stay
  /// strictly positive under projection.
  void default_bounds() {
    const double inf = std::numeric_limits<double>::infinity();
    const double tiny = 1e-300;
    lower.assign(static_cast<std::size_t>(parameter_count()), -inf);
    upper.assign(static_cast<std::size_t>(parameter_count()), inf);
    switch (id) {
      case FitModelId::lorentzian_multi:
        for (int i = 0; i < dips; ++i) lower[2 + 3 * static_cast<std::size_t>(i)] = tiny;
        break;
      case FitModelId::ramsey_3cos: lower[2] = tiny; break;
      case FitModelId::exp_decay: lower[1] = tiny; break;
      case FitModelId::damped_sin: lower[1] = tiny; break;
    }
  }

  void validate() const {
    if (id == FitModelId::lorentzian_multi && dips < 1)
      throw std::invalid_argument("fit: lorentzian_multi needs n >= 1");
    const auto n = static_cast<std::size_t>(parameter_count());
    if (lower.size() != n || upper.size() != n)
      throw std::invalid_argument("fit: bounds must match the parameter count");
    for (std::size_t j = 0; j < n; ++j)
      if (!(lower[j] <= upper[j]))
        throw std::invalid_argument("fit: lower bound exceeds upper bound");
  }
};

inline double model_lorentzian_multi(double f, std::span<const double> p, int dips) {
  double v = p[0];
  for (int i = 0; i < dips; ++i) {
    const double c = p[1 + 3 * static_cast<std::size_t>(i)];
    const double w = p[2 + 3 * static_cast<std::size_t>(i)];
    const double d = p[3 + 3 * static_cast<std::size_t>(i)];
    const double hw2 = 0.25 * w * w;
    v -= d * hw2 / ((f - c) * (f - c) + hw2);
  }
  return v;
}

inline double model_ramsey_3cos(double t, std::span<const double> p) {
  double sum = 0.0;
  for (int k = 0; k < 3; ++k)
    sum += std::cos(2.0 * M_PI * p[3 + static_cast<std::size_t>(k)] * t +
                    p[6 + static_cast<std::size_t>(k)]);
  return p[0] + p[1] * std::exp(-t / p[2]) * sum;
}

inline double model_exp_decay(double t, std::span<const double> p) {
  return p[0] * std::exp(-t / p[1]) + p[2];
}

inline double model_damped_sin(double t, std::span<const double> p) {
  return p[0] * std::exp(-t / p[1]) * std::sin(2.0 * M_PI * p[2] * t + p[3]) + p[4];
}

inline double model_eval(const FitModel& model, double x, std::span<const double> p) {
  switch (model.id) {
    case FitModelId::lorentzian_multi: return model_lorentzian_multi(x, p, model.dips);
    case FitModelId::ramsey_3cos: return model_ramsey_3cos(x, p);
    case FitModelId::exp_decay: return model_exp_decay(x, p);
    case FitModelId::damped_sin: return model_damped_sin(x, p);
  }
  return 0.0;
}

/// Forward-difference model Jacobian d f(x_i) / d p_j, step 1e-6 relative to
/// each parameter (1e-6 absolute for exactly-zero parameters): the same
/// derivative the engine iterates on.
inline Eigen::MatrixXd fit_jacobian(const FitModel& model, const std::vector<double>& x,
                                    const std::vector<double>& params) {
  const int n = model.parameter_count();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(x.size()), n);
  std::vector<double> p = params;
  std::vector<double> f0(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) f0[i] = model_eval(model, x[i], p);
  for (int j = 0; j < n; ++j) {
    const double saved = p[static_cast<std::size_t>(j)];
    const double step = saved != 0.0 ? 1e-6 * std::abs(saved) : 1e-6;
    p[static_cast<std::size_t>(j)] = saved + step;
    const double h = p[static_cast<std::size_t>(j)] - saved;  // representable step
    for (std::size_t i = 0; i < x.size(); ++i)
      jac(static_cast<Eigen::Index>(i), j) = (model_eval(model, x[i], p) - f0[i]) / h;
    p[static_cast<std::size_t>(j)] = saved;
  }
  return jac;
}

struct FitResult {
  std::vector<double> parameters;
  Eigen::MatrixXd covariance;  // sigma^2 (J^T J)^+ at the optimum
  double residual_norm = 0.0;  // sqrt of the (weighted) sum of squares
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline double wrap_phase(double phi) {
  double w = std::fmod(phi + M_PI, 2.0 * M_PI);
  if (w <= 0.0) w += 2.0 * M_PI;
  return w - M_PI;
}

/// Resolve the exact symmetries of each model: sorted dips/tones, positive
/// widths and amplitudes, phases in (-pi, pi].
inline void canonicalize(const FitModel& model, std::vector<double>& p) {
  switch (model.id) {
    case FitModelId::lorentzian_multi: {
      std::vector<std::array<double, 3>> dips;
      for (int i = 0; i < model.dips; ++i)
        dips.push_back({p[1 + 3 * static_cast<std::size_t>(i)],
                        std::abs(p[2 + 3 * static_cast<std::size_t>(i)]),
                        p[3 + 3 * static_cast<std::size_t>(i)]});
      std::sort(dips.begin(), dips.end(),
                [](const auto& a, const auto& b) { return a[0] < b[0]; });
      for (int i = 0; i < model.dips; ++i)
        for (int k = 0; k < 3; ++k)
          p[1 + 3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(k)] =
              dips[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      break;
    }
    case FitModelId::ramsey_3cos: {
      if (p[1] < 0.0) {  // cos(x + pi) = -cos(x)
        p[1] = -p[1];
        for (int k = 0; k < 3; ++k) p[6 + static_cast<std::size_t>(k)] += M_PI;
      }
      std::vector<std::pair<double, double>> tones;
      for (int k = 0; k < 3; ++k) {
        double f = p[3 + static_cast<std::size_t>(k)];
        double phi = p[6 + static_cast<std::size_t>(k)];
        if (f < 0.0) {  // cos is even
          f = -f;
          phi = -phi;
        }
        tones.emplace_back(f, wrap_phase(phi));
      }
      std::sort(tones.begin(), tones.end());
      for (int k = 0; k < 3; ++k) {
        p[3 + static_cast<std::size_t>(k)] = tones[static_cast<std::size_t>(k)].first;
        p[6 + static_cast<std::size_t>(k)] = tones[static_cast<std::size_t>(k)].second;
      }
      break;
    }
    case FitModelId::exp_decay: break;
    case FitModelId::damped_sin: {
      if (p[2] < 0.0) {  // sin(-x + phi) = -sin(x - phi)
        p[2] = -p[2];
        p[3] = -p[3];
        p[0] = -p[0];
      }
      if (p[0] < 0.0) {  // sin(x + pi) = -sin(x)
        p[0] = -p[0];
        p[3] += M_PI;
      }
      p[3] = wrap_phase(p[3]);
      break;
    }
  }
}

/// Solve the symmetric positive (semi)definite system A d = b through the
/// project's Jacobi eigensolver, dropping near-null directions.
inline Eigen::VectorXd solve_spsd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  const HermitianEigen eig = hermitian_eigensolve(sym.cast<Complex>());
  const double cutoff = 1e-14 * std::max(eig.values.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(b.size());
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    if (eig.values(k) <= cutoff) continue;
    const Complex proj = (eig.vectors.col(k).adjoint() * b.cast<Complex>())(0, 0);
    d += (proj / eig.values(k) * eig.vectors.col(k)).real();
  }
  return d;
}

inline Eigen::MatrixXd pseudo_inverse_spsd(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  const HermitianEigen eig = hermitian_eigensolve(sym.cast<Complex>());
  const double cutoff = 1e-12 * std::max(eig.values.cwiseAbs().maxCoeff(), 1e-300);
  MatrixXc inv = MatrixXc::Zero(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < eig.values.size(); ++k)
    if (eig.values(k) > cutoff)
      inv += eig.vectors.col(k) * eig.vectors.col(k).adjoint() / eig.values(k);
  return inv.real();
}

/// Symmetric diagonal scaling D = diag(H)^{-1/2}. Parameters mix scales as
/// extreme as hertz and seconds, so raw J^T J spans ~20 decades and a relative
/// eigenvalue cutoff would silently freeze the small-curvature directions;
/// in scaled (correlation) form the spectrum is tame.
inline Eigen::VectorXd jacobi_scale(const Eigen::MatrixXd& h) {
  Eigen::VectorXd s(h.rows());
  for (Eigen::Index j = 0; j < h.rows(); ++j)
    s(j) = h(j, j) > 0.0 ? 1.0 / std::sqrt(h(j, j)) : 1.0;
  return s;
}

} // namespace detail

/// Levenberg-Marquardt: numeric forward-difference Jacobian, damping lambda
/// starting at 1e-3 (x10 on reject, /10 on accept) applied to the
/// diagonally scaled normal equations, bounds by projection. Stops when the
/// relative residual change falls below 1e-10 -- measured against the larger
/// of the current residual and the data norm so exact fits terminate at the
/// rounding floor -- when no damped step improves at all, or after 200
/// iterations (only the last counts as non-convergence).
inline FitResult fit(const FitModel& model, const std::vector<double>& x,
                     const std::vector<double>& y, const std::vector<double>& init) {
  model.validate();
  const int n = model.parameter_count();
  const std::size_t m = x.size();
  if (y.size() != m)
    throw std::invalid_argument("fit: x and y lengths differ");
  if (init.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("fit: initial guess has the wrong length");
  if (m < static_cast<std::size_t>(n))
    throw std::invalid_argument("fit: fewer data points than parameters");
  for (std::size_t i = 0; i < m; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw std::invalid_argument("fit: non-finite data");
  for (double v : init)
    if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite initial guess");

  std::vector<double> sqrt_w(m, 1.0);
  if (model.poisson_weights)
    for (std::size_t i = 0; i < m; ++i) sqrt_w[i] = 1.0 / std::sqrt(std::max(y[i], 1.0));

  auto project = [&](std::vector<double> p) {
    for (int j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      p[ju] = std::clamp(p[ju], model.lower[ju], model.upper[ju]);
    }
    return p;
  };
  auto cost_of = [&](const std::vector<double>& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = sqrt_w[i] * (model_eval(model, x[i], p) - y[i]);
      c += r * r;
    }
    return c;
  };

  double data_scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) data_scale += sqrt_w[i] * y[i] * sqrt_w[i] * y[i];
  data_scale = std::max(std::sqrt(data_scale), 1e-300);

  std::vector<double> p = project(init);
  double cost = cost_of(p);
  double lambda = 1e-3;
  FitResult result;
  result.iterations = 0;

  bool jac_stale = true;
  Eigen::MatrixXd jac, scaled_hessian;
  Eigen::VectorXd scale, scaled_gradient;
  while (result.iterations < 200) {
    ++result.iterations;
    if (jac_stale) {
      jac = fit_jacobian(model, x, p);
      for (std::size_t i = 0; i < m; ++i) jac.row(static_cast<Eigen::Index>(i)) *= sqrt_w[i];
      Eigen::VectorXd r(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i)
        r(static_cast<Eigen::Index>(i)) = sqrt_w[i] * (model_eval(model, x[i], p) - y[i]);
      const Eigen::MatrixXd hessian = jac.transpose() * jac;
      scale = detail::jacobi_scale(hessian);
      scaled_hessian = scale.asDiagonal() * hessian * scale.asDiagonal();
      scaled_gradient = scale.asDiagonal() * (jac.transpose() * r);
      jac_stale = false;
    }

    // lambda on the unit diagonal of the scaled system is Marquardt's
    // lambda * diag(J^T J) damping in the original coordinates.
    Eigen::MatrixXd damped = scaled_hessian;
    damped.diagonal().array() += lambda;
    const Eigen::VectorXd delta =
        scale.asDiagonal() * detail::solve_spsd(damped, -scaled_gradient);

    std::vector<double> trial = p;
    for (int j = 0; j < n; ++j) trial[static_cast<std::size_t>(j)] += delta(j);
    trial = project(std::move(trial));
    const double trial_cost = cost_of(trial);

    if (trial_cost < cost) {
      const double rel_change = (std::sqrt(cost) - std::sqrt(trial_cost)) /
                                std::max(std::sqrt(cost), data_scale);
      p = std::move(trial);
      cost = trial_cost;
      lambda = std::max(lambda / 10.0, 1e-15);
      jac_stale = true;
      if (rel_change < 1e-10) {
        result.converged = true;
        break;
      }
    } else {
      if (cost == 0.0 || lambda >= 1e15) {
        // No damped step improves: the residual cannot change any further.
        result.converged = true;
        break;
      }
      lambda *= 10.0;
    }
  }

  detail::canonicalize(model, p);
  cost = cost_of(p);  // symmetry transforms preserve this up to rounding
  result.parameters = p;
  result.residual_norm = std::sqrt(cost);

  Eigen::MatrixXd jfinal = fit_jacobian(model, x, p);
  for (std::size_t i = 0; i < m; ++i) jfinal.row(static_cast<Eigen::Index>(i)) *= sqrt_w[i];
  const double dof = static_cast<double>(m) - static_cast<double>(n);
  const double sigma2 = dof > 0.0 ? cost / dof : 0.0;
  const Eigen::MatrixXd hfinal = jfinal.transpose() * jfinal;
  const Eigen::VectorXd sfinal = detail::jacobi_scale(hfinal);
  result.covariance =
      sigma2 * (sfinal.asDiagonal() *
                detail::pseudo_inverse_spsd(sfinal.asDiagonal() * hfinal * sfinal.asDiagonal()) *
                sfinal.asDiagonal());
  return result;
}

/// Heuristic starting points: prominence-ranked smoothed dips, log-linear
/// regression for decays, FFT peaks for oscillations. Throws
/// UnderDeterminedError when the data shows fewer features than the model.
inline std::vector<double> initial_guess(const FitModel& model, const std::vector<double>& x,
                                         const std::vector<double>& y) {
  model.validate();
  if (x.size() != y.size() || x.size() < 4)
    throw std::invalid_argument("fit: initial_guess needs >= 4 matching samples");
  const std::size_t m = x.size();
  const double y_min = *std::min_element(y.begin(), y.end());
  const double y_max = *std::max_element(y.begin(), y.end());
  const double span_x = x.back() - x.front();
  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= static_cast<double>(m);

  switch (model.id) {
    case FitModelId::lorentzian_multi: {
      // Moving-average smoothing, window 5.
      std::vector<double> s(m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t a = i >= 2 ? i - 2 : 0;
        const std::size_t b = std::min(i + 2, m - 1);
        double acc = 0.0;
        for (std::size_t k = a; k <= b; ++k) acc += y[k];
        s[i] = acc / static_cast<double>(b - a + 1);
      }
      struct Dip {
        std::size_t index;
        double prominence;
      };
      std::vector<Dip> dips;
      for (std::size_t i = 1; i + 1 < m; ++i) {
        if (!(s[i] < s[i - 1] && s[i] <= s[i + 1])) continue;
        double left = s[i];
        for (std::size_t k = i; k-- > 0;) {
          left = std::max(left, s[k]);
          if (s[k] < s[i]) break;
        }
        double right = s[i];
        for (std::size_t k = i + 1; k < m; ++k) {
          right = std::max(right, s[k]);
          if (s[k] < s[i]) break;
        }
        const double prom = std::min(left, right) - s[i];
        if (prom > 0.0) dips.push_back({i, prom});
      }
      std::sort(dips.begin(), dips.end(),
                [](const Dip& a, const Dip& b) { return a.prominence > b.prominence; });
      if (dips.size() < static_cast<std::size_t>(model.dips))
        throw UnderDeterminedError("fit: data shows fewer dips than the model requires");
      dips.resize(static_cast<std::size_t>(model.dips));
      std::sort(dips.begin(), dips.end(),
                [](const Dip& a, const Dip& b) { return a.index < b.index; });

      // Baseline: mean of the top quartile of the smoothed curve.
      std::vector<double> sorted = s;
      std::sort(sorted.begin(), sorted.end());
      double baseline = 0.0;
      const std::size_t q = std::max<std::size_t>(m / 4, 1);
      for (std::size_t k = m - q; k < m; ++k) baseline += sorted[k];
      baseline /= static_cast<double>(q);

      std::vector<double> p(static_cast<std::size_t>(model.parameter_count()));
      p[0] = baseline;
      for (int d = 0; d < model.dips; ++d) {
        const std::size_t i = dips[static_cast<std::size_t>(d)].index;
        const double depth = baseline - s[i];
        // Width from the half-depth crossings around the minimum.
        const double half = s[i] + 0.5 * depth;
        std::size_t lo = i, hi = i;
        while (lo > 0 && s[lo] < half) --lo;
        while (hi + 1 < m && s[hi] < half) ++hi;
        double width = std::abs(x[hi] - x[lo]);
        if (!(width > 0.0)) width = std::abs(span_x) / (5.0 * model.dips);
        p[1 + 3 * static_cast<std::size_t>(d)] = x[i];
        p[2 + 3 * static_cast<std::size_t>(d)] = width;
        p[3 + 3 * static_cast<std::size_t>(d)] = depth;
      }
      return p;
    }
    case FitModelId::exp_decay: {
      // Log-linear regression on the positive residuals above an offset
      // pinned slightly below the smallest sample.
      const double offset = y_min - 1e-6 * std::max(y_max - y_min, 1e-300);
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      std::size_t used = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const double r = y[i] - offset;
        if (!(r > 0.0)) continue;
        const double ly = std::log(r);
        sx += x[i];
        sy += ly;
        sxx += x[i] * x[i];
        sxy += x[i] * ly;
        ++used;
      }
      if (used < 2) throw UnderDeterminedError("fit: no decaying signal above the offset");
      const double denom = static_cast<double>(used) * sxx - sx * sx;
      const double slope = denom != 0.0 ? (static_cast<double>(used) * sxy - sx * sy) / denom : 0.0;
      const double intercept = (sy - slope * sx) / static_cast<double>(used);
      const double t_decay = slope < 0.0 ? -1.0 / slope : std::abs(span_x);
      return {std::exp(intercept), t_decay, offset};
    }
    case FitModelId::damped_sin: {
      const double spacing = std::abs(span_x) / static_cast<double>(m - 1);
      const SpectralPeak peak = dominant_frequency(y, spacing);
      double var = 0.0;
      for (double v : y) var += (v - y_mean) * (v - y_mean);
      var /= static_cast<double>(m);
      const double amp = std::sqrt(2.0 * var);
      double phi = 0.0;
      if (amp > 0.0) {
        phi = std::asin(std::clamp((y[0] - y_mean) / amp, -1.0, 1.0));
        if (m > 1 && y[1] < y[0]) phi = M_PI - phi;
      }
      return {amp, std::abs(span_x), peak.frequency, detail::wrap_phase(phi), y_mean};
    }
    case FitModelId::ramsey_3cos: {
      const double spacing = std::abs(span_x) / static_cast<double>(m - 1);
      std::vector<SpectralPeak> peaks;
      try {
        peaks = top_frequencies(y, spacing, 3);
      } catch (const std::runtime_error&) {
        throw UnderDeterminedError("fit: fewer than three tones detectable");
      }
      const double amp = (y_max - y_min) / 6.0;
      return {y_mean,           amp,     std::abs(span_x) / 2.0,
              peaks[0].frequency, peaks[1].frequency, peaks[2].frequency,
              0.0,              0.0,     0.0};
    }
  }
  throw std::invalid_argument("fit: unknown model");
}

/// Fit report for export: parameters with one-sigma uncertainties from the
/// covariance diagonal.
inline nlohmann::json fit_report_json(const FitModel& model, const FitResult& result) {
  nlohmann::json unc = nlohmann::json::array();
  for (Eigen::Index j = 0; j < result.covariance.rows(); ++j)
    unc.push_back(std::sqrt(std::max(result.covariance(j, j), 0.0)));
  return {{"model", model.name()},
          {"parameter_count", model.parameter_count()},
          {"parameters", result.parameters},
          {"uncertainties", std::move(unc)},
          {"residual_norm", result.residual_norm},
          {"converged", result.converged},
          {"iterations", result.iterations}};
}

} // namespace nvsim
