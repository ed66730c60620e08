#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "superbunch/signal.hpp"

namespace superbunch {

/// Rotating-groundglass field statistics.
struct SpeckleParams {
  double bandwidth = 0.0;  // angular bandwidth Delta-omega, rad/s
  double gain = 1.0;       // mean |E|^2
  std::uint64_t seed = 0;

  double coherence_time() const;  // 2 pi / Delta-omega
};

/// Sampled complex speckle field on a uniform grid.
struct ComplexFieldTrace {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<std::complex<double>> samples;
  double nominal_intensity = 1.0;  // ensemble mean of |E|^2

  std::size_t size() const { return samples.size(); }
  double empirical_intensity() const;
  /// |E|^2 as an intensity trace on the same grid.
  IntensityTrace intensity() const;
};

/// Stationary circular complex Gaussian field with a flat spectrum of
/// angular width Delta-omega centred on the carrier, so the normalized field
/// autocorrelation is sinc(Delta-omega tau / 2). Throws ConfigError when
/// dt > 2 pi / (10 Delta-omega).
ComplexFieldTrace generate_speckle_field(const SpeckleParams& params, double t0, double dt,
                                         std::size_t n);

/// Pointwise product input * |field|^2. Grids must match exactly.
IntensityTrace apply_speckle(const IntensityTrace& input, const ComplexFieldTrace& field);

}  // namespace superbunch
