#pragma once

// Discrete Fourier transform of arbitrary length: iterative radix-2 for powers
// of two, Bluestein's chirp-z otherwise.

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "hrtfeval/numeric.hpp"

namespace hrtfeval::fft {

using Complex = std::complex<double>;

namespace detail {

inline void radix2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    // Twiddles evaluated directly rather than by recurrence to keep error flat.
    std::vector<Complex> w(half);
    for (std::size_t k = 0; k < half; ++k) {
      w[k] = Complex(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

inline void bluestein(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for long transforms.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = Complex(std::cos(ang), std::sin(ang));
  }
  std::vector<Complex> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  radix2(x, false);
  radix2(y, false);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  radix2(x, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

}  // namespace detail

/// Unnormalised forward transform (inverse=false) or inverse transform
/// including the 1/N factor (inverse=true).
inline void transform(std::vector<Complex>& a, bool inverse = false) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if (std::has_single_bit(n)) {
    detail::radix2(a, inverse);
  } else {
    detail::bluestein(a, inverse);
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= scale;
  }
}

inline std::vector<Complex> forward_real(std::span<const double> x) {
  std::vector<Complex> a(x.begin(), x.end());
  transform(a, false);
  return a;
}

/// |X[k]| for k = 0 .. floor(N/2) (DC to Nyquist inclusive).
inline std::vector<double> magnitude_spectrum(std::span<const double> x) {
  const auto spec = forward_real(x);
  std::vector<double> mag(x.size() / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spec[k]);
  return mag;
}

inline double bin_frequency_hz(std::size_t bin, std::size_t length, double sample_rate_hz) {
  return static_cast<double>(bin) * sample_rate_hz / static_cast<double>(length);
}

}  // namespace hrtfeval::fft
