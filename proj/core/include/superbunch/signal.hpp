#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "superbunch/curve.hpp"

namespace superbunch {

/// Sinusoidal voltage-to-intensity response of the EOM between crossed
/// polarizers, in detector-scaled units:
///   I(V) = offset + amplitude * sin(pi (V - center) / period)
struct EomTransfer {
  double offset = 2.04;
  double amplitude = 1.92;
  double period = 8.65;  // V
  double center = 0.49;  // V

  double operator()(double v_in) const;
  double minimum() const { return offset - amplitude; }
  double maximum() const { return offset + amplitude; }
};

/// Measured transfer with the default fit constants. Throws DomainError on
/// non-finite input.
double eom_transfer(double v_in);

struct ConstantModulation {
  double base_intensity = 1.0;
};

/// I(t) = I0 [1 + C cos(w0 t + phi)]
struct SinusoidModulation {
  double base_intensity = 1.0;
  double depth = 1.0;
  double angular_frequency = 0.0;  // rad/s
  double phase = 0.0;
};

/// |a(t)|^2 of a circular complex Gaussian field with a flat spectrum over
/// [0, cutoff_hz), rescaled to the requested mean, then optionally clipped
/// and quantized.
struct BandNoiseModulation {
  double mean_intensity = 1.0;
  double cutoff_hz = 0.0;
  std::optional<double> clip_level;
  std::optional<int> quantization_bits;

  /// Saturation at twice the mean with 8-bit quantization.
  static BandNoiseModulation realistic(double mean_intensity, double cutoff_hz) {
    return {mean_intensity, cutoff_hz, 2.0 * mean_intensity, 8};
  }
};

enum class DriveShape { Sinusoid, BandNoise };

/// Intensity proportional to EomTransfer(v(t)). A sinusoidal drive is
/// v(t) = (V_pp/2) cos(2 pi f t + phase); a noise drive is a real Gaussian
/// voltage with standard deviation V_pp/6 and flat spectrum on [0, f).
/// Optional drive quantization models a signal generator of finite
/// resolution over [-V_pp/2, V_pp/2].
struct EomDrivenModulation {
  DriveShape shape = DriveShape::Sinusoid;
  double v_pp = 0.0;
  double frequency_hz = 0.0;
  double phase = 0.0;
  std::optional<int> drive_bits;
  EomTransfer transfer{};
};

using ModulationModel = std::variant<ConstantModulation, SinusoidModulation,
                                     BandNoiseModulation, EomDrivenModulation>;

/// Checks the model's parameter invariants; throws ConfigError.
void validate(const ModulationModel& model);

/// Uniformly sampled nonnegative intensity (scaled units).
struct IntensityTrace {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> samples;
  double declared_mean = 0.0;
  /// Set when the trace spans fewer than ten correlation times of the model.
  bool short_trace = false;

  std::size_t size() const { return samples.size(); }
  double duration() const { return dt * static_cast<double>(samples.size()); }
  double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
};

/// Samples `model` at t0 + i dt for i < n. Deterministic in `seed`.
/// Throws ConfigError for an undersampled noise band.
IntensityTrace sample_intensity(const ModulationModel& model, double t0, double dt,
                                std::size_t n, std::uint64_t seed);

/// Gamma(tau) = <I(t) I(t+tau)>_t / <I>^2 for tau = 0, dt, ..., <= max_lag.
G2Curve modulation_autocorrelation(const IntensityTrace& trace, double max_lag);

/// CSV with header `t_s,intensity`.
void write_trace_csv(std::ostream& out, const IntensityTrace& trace);

/// Applies hard saturation at `level` in place.
void clip_samples(std::vector<double>& samples, double level);

/// Uniform mid-tread quantization onto 2^bits levels spanning [0, max(samples)].
void quantize_samples(std::vector<double>& samples, int bits);

}  // namespace superbunch
