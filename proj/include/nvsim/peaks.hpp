#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nvsim {

struct Dip {
  std::size_t index = 0;
  double x = 0.0;
  double depth = 0.0;       // baseline-to-minimum
  double prominence = 0.0;
};

/// Centered moving average with edge clamping.
inline std::vector<double> moving_average(const std::vector<double>& y, int window) {
  if (window < 1) throw std::invalid_argument("peaks: window must be >= 1");
  const int n = static_cast<int>(y.size());
  const int half = window / 2;
  std::vector<double> out(y.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += y[k];
    out[i] = s / (hi - lo + 1);
  }
  return out;
}

inline std::vector<std::size_t> local_minima(const std::vector<double>& y) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] < y[i - 1] && y[i] < y[i + 1]) out.push_back(i);
  return out;
}

/// Dips of a 1D trace, prominence-ranked (deepest first). The prominence of a
/// minimum is the smaller of the two barriers separating it from a lower
/// minimum or from the trace edge.
inline std::vector<Dip> find_dips(const std::vector<double>& x, const std::vector<double>& y,
                                  int smooth_window = 1) {
  if (x.size() != y.size()) throw std::invalid_argument("peaks: length mismatch");
  const std::vector<double> ys = smooth_window > 1 ? moving_average(y, smooth_window) : y;
  const auto minima = local_minima(ys);
  const double top = *std::max_element(ys.begin(), ys.end());
  std::vector<Dip> dips;
  for (std::size_t i : minima) {
    double left = ys[i];
    for (std::size_t k = i; k-- > 0;) {
      left = std::max(left, ys[k]);
      if (ys[k] < ys[i]) break;
    }
    double right = ys[i];
    for (std::size_t k = i + 1; k < ys.size(); ++k) {
      right = std::max(right, ys[k]);
      if (ys[k] < ys[i]) break;
    }
    dips.push_back({i, x[i], top - ys[i], std::min(left, right) - ys[i]});
  }
  std::stable_sort(dips.begin(), dips.end(),
                   [](const Dip& a, const Dip& b) { return a.prominence > b.prominence; });
  return dips;
}

/// Number of resolved dips: local minima closer than min_separation in x are
/// merged into a single cluster. Minima with prominence below
/// prominence_floor (absolute) are ignored.
inline int resolved_dip_count(const std::vector<double>& x, const std::vector<double>& y,
                              double min_separation, double prominence_floor = 1e-6) {
  auto dips = find_dips(x, y);
  std::erase_if(dips, [&](const Dip& d) { return d.prominence < prominence_floor; });
  if (dips.empty()) return 0;
  std::sort(dips.begin(), dips.end(), [](const Dip& a, const Dip& b) { return a.x < b.x; });
  int clusters = 1;
  for (std::size_t i = 1; i < dips.size(); ++i)
    if (dips[i].x - dips[i - 1].x > min_separation) ++clusters;
  return clusters;
}

/// Sub-grid minimum location by parabolic interpolation through the sample at
/// idx and its neighbors.
inline double parabolic_minimum(const std::vector<double>& x, const std::vector<double>& y,
                                std::size_t idx) {
  if (idx == 0 || idx + 1 >= y.size()) return x[idx];
  const double denom = y[idx - 1] - 2.0 * y[idx] + y[idx + 1];
  if (denom <= 0.0) return x[idx];
  const double shift = 0.5 * (y[idx - 1] - y[idx + 1]) / denom;
  return x[idx] + shift * (x[idx + 1] - x[idx]);
}

} // namespace nvsim
