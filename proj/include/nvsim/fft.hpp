#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nvsim {

// Iterative radix-2 FFT, enough for peak-frequency estimation on padded
// sweeps; no attempt at large-N performance tricks.

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place power-of-two FFT (inverse includes the 1/N factor).
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse = false) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft: length must be a nonzero power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {  // bit-reversal permutation
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

struct SpectralPeak {
  double frequency = 0.0;  // in cycles per x-unit of the input grid
  double magnitude = 0.0;
  std::size_t bin = 0;
};

namespace detail {

struct MagnitudeSpectrum {
  std::vector<double> magnitude;  // bins 0 .. n/2-1
  std::size_t n = 0;              // padded transform length
  double bin_hz = 0.0;            // frequency per bin, cycles per x-unit
};

inline MagnitudeSpectrum padded_spectrum(const std::vector<double>& samples, double sample_spacing,
                                std::size_t pad_factor) {
  if (samples.size() < 4 || !(sample_spacing > 0.0))
    throw std::invalid_argument("fft: need >= 4 samples and positive spacing");
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());

  const std::size_t n = next_pow2(samples.size()) * next_pow2(std::max<std::size_t>(pad_factor, 1));
  std::vector<std::complex<double>> a(n, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) a[i] = samples[i] - mean;
  fft_radix2(a);

  MagnitudeSpectrum spec;
  spec.n = n;
  spec.bin_hz = 1.0 / (static_cast<double>(n) * sample_spacing);
  spec.magnitude.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) spec.magnitude[k] = std::abs(a[k]);
  return spec;
}

/// Sub-bin refinement by parabolic interpolation of the log magnitude.
inline double interpolate_bin(const std::vector<double>& mag, std::size_t bin) {
  if (bin < 2 || bin + 1 >= mag.size()) return 0.0;
  const double lm = std::log(mag[bin - 1] + 1e-300);
  const double cm = std::log(mag[bin] + 1e-300);
  const double rm = std::log(mag[bin + 1] + 1e-300);
  const double denom = lm - 2.0 * cm + rm;
  return std::abs(denom) > 1e-12 ? 0.5 * (lm - rm) / denom : 0.0;
}

} // namespace detail

/// The `count` strongest local maxima of the magnitude spectrum of a
/// uniformly sampled real signal (mean removed, zero-padded by `pad_factor`),
/// sorted by frequency. Peaks closer than one pre-padding FFT bin merge into
/// their stronger neighbour. Throws when fewer than `count` peaks exist.
inline std::vector<SpectralPeak> top_frequencies(const std::vector<double>& samples,
                                                 double sample_spacing, std::size_t count,
                                                 std::size_t pad_factor = 8) {
  const auto spec = detail::padded_spectrum(samples, sample_spacing, pad_factor);
  const auto& mag = spec.magnitude;

  std::vector<SpectralPeak> maxima;
  for (std::size_t k = 1; k + 1 < mag.size(); ++k)
    if (mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] > 0.0)
      maxima.push_back({0.0, mag[k], k});
  std::sort(maxima.begin(), maxima.end(),
            [](const SpectralPeak& a, const SpectralPeak& b) { return a.magnitude > b.magnitude; });

  const std::size_t min_separation = next_pow2(std::max<std::size_t>(pad_factor, 1));
  std::vector<SpectralPeak> picked;
  for (const auto& peak : maxima) {
    bool clashes = false;
    for (const auto& p : picked)
      clashes = clashes || (peak.bin > p.bin ? peak.bin - p.bin : p.bin - peak.bin) < min_separation;
    if (!clashes) picked.push_back(peak);
    if (picked.size() == count) break;
  }
  if (picked.size() < count)
    throw std::runtime_error("fft: fewer spectral peaks than requested");
  for (auto& p : picked)
    p.frequency = (static_cast<double>(p.bin) + detail::interpolate_bin(mag, p.bin)) * spec.bin_hz;
  std::sort(picked.begin(), picked.end(),
            [](const SpectralPeak& a, const SpectralPeak& b) { return a.frequency < b.frequency; });
  return picked;
}

/// Dominant nonzero-frequency component of a uniformly sampled real signal.
inline SpectralPeak dominant_frequency(const std::vector<double>& samples, double sample_spacing,
                                       std::size_t pad_factor = 8) {
  const auto spec = detail::padded_spectrum(samples, sample_spacing, pad_factor);
  SpectralPeak peak;
  for (std::size_t k = 1; k < spec.magnitude.size(); ++k)
    if (spec.magnitude[k] > peak.magnitude) {
      peak.magnitude = spec.magnitude[k];
      peak.bin = k;
    }
  peak.frequency = (static_cast<double>(peak.bin) +
                    detail::interpolate_bin(spec.magnitude, peak.bin)) * spec.bin_hz;
  return peak;
}

} // namespace nvsim
