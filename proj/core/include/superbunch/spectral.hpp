#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace superbunch::spectral {

/// Frequency interval [low_hz, high_hz) of a complex baseband process.
struct Band {
  double low_hz;
  double high_hz;
};

/// Integer frequency indices [first, last) selected by `band` on a periodic
/// grid of n samples spaced dt apart (frequency step 1/(n dt)). Edges are
/// rounded to the nearest grid frequency.
struct BinRange {
  long long first;
  long long last;
  std::size_t count() const { return static_cast<std::size_t>(last - first); }
};

BinRange band_bins(std::size_t n, double dt, Band band);

/// Circular complex Gaussian process with a flat power spectrum on `band`:
/// every in-band Fourier coefficient is an independent circular complex
/// normal, every other coefficient is zero, and the inverse transform gives
/// the time series. Scaled so that E|a(t)|^2 = mean_power.
///
/// Throws ConfigError when the band is empty on this grid or reaches the
/// Nyquist frequency.
std::vector<std::complex<double>> synthesize_band_field(std::size_t n, double dt,
                                                        Band band, double mean_power,
                                                        std::uint64_t seed);

/// Overlap-averaged lag products  c[k] = sum_i x[i] x[i+k] / (n - k)
/// for k = 0..max_lag, computed with a zero-padded FFT.
std::vector<double> lag_products(std::span<const double> x, std::size_t max_lag);

}  // namespace superbunch::spectral
