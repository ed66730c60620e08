#include "superbunch/speckle.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

#include "superbunch/errors.hpp"
#include "superbunch/spectral.hpp"

namespace superbunch {

double SpeckleParams::coherence_time() const { return 2.0 * std::numbers::pi / bandwidth; }

double ComplexFieldTrace::empirical_intensity() const {
  double sum = 0.0;
  for (const auto& e : samples) sum += std::norm(e);
  return sum / static_cast<double>(samples.size());
}

IntensityTrace ComplexFieldTrace::intensity() const {
  IntensityTrace trace;
  trace.t0 = t0;
  trace.dt = dt;
  trace.samples.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) trace.samples[i] = std::norm(samples[i]);
  trace.declared_mean = nominal_intensity;
  return trace;
}

ComplexFieldTrace generate_speckle_field(const SpeckleParams& params, double t0, double dt,
                                         std::size_t n) {
  if (!(params.bandwidth > 0.0) || !std::isfinite(params.bandwidth)) {
    throw ConfigError("speckle: bandwidth must be positive");
  }
  if (!(params.gain > 0.0)) throw ConfigError("speckle: gain must be positive");
  if (n == 0) throw DomainError("speckle: empty grid");
  if (!(dt > 0.0)) throw ConfigError("speckle: dt must be positive");
  const double limit = params.coherence_time() / 10.0;
  if (dt > limit) {
    throw ConfigError(fmt::format(
        "speckle: sample interval {:g} s undersamples coherence time {:g} s (need dt <= {:g} s)",
        dt, params.coherence_time(), limit));
  }

  const double half_band_hz = params.bandwidth / (4.0 * std::numbers::pi);
  ComplexFieldTrace field;
  field.t0 = t0;
  field.dt = dt;
  field.nominal_intensity = params.gain;
  field.samples = spectral::synthesize_band_field(n, dt, {-half_band_hz, half_band_hz},
                                                  params.gain, params.seed);
  return field;
}

IntensityTrace apply_speckle(const IntensityTrace& input, const ComplexFieldTrace& field) {
  if (input.samples.empty() || field.samples.empty()) {
    throw DomainError("apply_speckle: empty trace");
  }
  if (input.size() != field.size() || input.t0 != field.t0 || input.dt != field.dt) {
    throw DomainError("apply_speckle: intensity and field grids differ");
  }
  IntensityTrace out;
  out.t0 = input.t0;
  out.dt = input.dt;
  out.short_trace = input.short_trace;
  out.samples.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out.samples[i] = input.samples[i] * std::norm(field.samples[i]);
  }
  out.declared_mean = input.declared_mean * field.nominal_intensity;
  return out;
}

}  // namespace superbunch
