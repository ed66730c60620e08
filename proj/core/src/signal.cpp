#include "superbunch/signal.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "superbunch/errors.hpp"
#include "superbunch/rng.hpp"
#include "superbunch/spectral.hpp"

namespace superbunch {
namespace {

constexpr double kPi = std::numbers::pi;

// Noise grids must resolve the band with at least ten samples per cycle of
// its highest frequency.
void require_resolved(double dt, double band_hz, const char* what) {
  if (dt > 1.0 / (10.0 * band_hz)) {
    throw ConfigError(fmt::format(
        "{}: sample interval {:g} s undersamples a {:g} Hz band (need dt <= {:g} s)", what,
        dt, band_hz, 1.0 / (10.0 * band_hz)));
  }
}

IntensityTrace make_trace(double t0, double dt, std::size_t n) {
  IntensityTrace trace;
  trace.t0 = t0;
  trace.dt = dt;
  trace.samples.resize(n);
  return trace;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

IntensityTrace sample(const ConstantModulation& m, double t0, double dt, std::size_t n,
                      std::uint64_t) {
  auto trace = make_trace(t0, dt, n);
  std::fill(trace.samples.begin(), trace.samples.end(), m.base_intensity);
  trace.declared_mean = m.base_intensity;
  return trace;
}

IntensityTrace sample(const SinusoidModulation& m, double t0, double dt, std::size_t n,
                      std::uint64_t) {
  auto trace = make_trace(t0, dt, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = trace.time(i);
    trace.samples[i] =
        m.base_intensity * (1.0 + m.depth * std::cos(m.angular_frequency * t + m.phase));
  }
  // Tiny negative values from rounding at C = 1.
  for (auto& s : trace.samples) s = std::max(s, 0.0);
  trace.declared_mean = m.base_intensity;
  return trace;
}

IntensityTrace sample(const BandNoiseModulation& m, double t0, double dt, std::size_t n,
                      std::uint64_t seed) {
  require_resolved(dt, m.cutoff_hz, "band noise");
  auto trace = make_trace(t0, dt, n);
  trace.short_trace = trace.duration() < 10.0 / m.cutoff_hz;

  const auto field =
      spectral::synthesize_band_field(n, dt, {0.0, m.cutoff_hz}, 1.0, seed);
  for (std::size_t i = 0; i < n; ++i) trace.samples[i] = std::norm(field[i]);

  const double scale = m.mean_intensity / mean_of(trace.samples);
  for (auto& s : trace.samples) s *= scale;
  if (m.clip_level) clip_samples(trace.samples, *m.clip_level);
  if (m.quantization_bits) quantize_samples(trace.samples, *m.quantization_bits);

  trace.declared_mean = mean_of(trace.samples);
  return trace;
}

double quantize_drive(double v, double v_pp, int bits) {
  const double half = 0.5 * v_pp;
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const double step = v_pp / levels;
  const double clamped = std::clamp(v, -half, half);
  return -half + std::round((clamped + half) / step) * step;
}

IntensityTrace sample(const EomDrivenModulation& m, double t0, double dt, std::size_t n,
                      std::uint64_t seed) {
  auto trace = make_trace(t0, dt, n);
  std::vector<double> drive(n);
  const double k = kPi / m.transfer.period;
  const double a = -k * m.transfer.center;
  const double sin_a = std::sin(a);

  if (m.shape == DriveShape::Sinusoid) {
    const double w = 2.0 * kPi * m.frequency_hz;
    for (std::size_t i = 0; i < n; ++i) {
      drive[i] = 0.5 * m.v_pp * std::cos(w * trace.time(i) + m.phase);
    }
    // Period average of sin(a + b cos x) is sin(a) J0(b).
    trace.declared_mean =
        m.transfer.offset + m.transfer.amplitude * sin_a * std::cyl_bessel_j(0.0, k * 0.5 * m.v_pp);
  } else {
    require_resolved(dt, m.frequency_hz, "EOM noise drive");
    trace.short_trace = trace.duration() < 10.0 / m.frequency_hz;
    const double sigma_v = m.v_pp / 6.0;
    const auto field =
        spectral::synthesize_band_field(n, dt, {0.0, m.frequency_hz}, 1.0, seed);
    for (std::size_t i = 0; i < n; ++i) {
      drive[i] = sigma_v * std::numbers::sqrt2 * field[i].real();
    }
    // E sin(a + kX) = sin(a) exp(-k^2 sigma^2 / 2) for X ~ N(0, sigma^2).
    trace.declared_mean = m.transfer.offset + m.transfer.amplitude * sin_a *
                                                  std::exp(-0.5 * k * k * sigma_v * sigma_v);
  }

  if (m.drive_bits) {
    for (auto& v : drive) v = quantize_drive(v, m.v_pp, *m.drive_bits);
  }
  for (std::size_t i = 0; i < n; ++i) trace.samples[i] = m.transfer(drive[i]);
  return trace;
}

}  // namespace

double EomTransfer::operator()(double v_in) const {
  if (!std::isfinite(v_in)) throw DomainError("eom_transfer: non-finite drive voltage");
  return offset + amplitude * std::sin(kPi * (v_in - center) / period);
}

double eom_transfer(double v_in) { return EomTransfer{}(v_in); }

void validate(const ModulationModel& model) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(fmt::format("modulation: {} must be positive and finite", name));
    }
  };
  auto bits_ok = [](const std::optional<int>& bits, const char* name) {
    if (bits && (*bits < 1 || *bits > 52)) {
      throw ConfigError(fmt::format("modulation: {} must be in [1, 52]", name));
    }
  };

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantModulation>) {
          positive(m.base_intensity, "base_intensity");
        } else if constexpr (std::is_same_v<T, SinusoidModulation>) {
          positive(m.base_intensity, "base_intensity");
          positive(m.angular_frequency, "angular frequency");
          if (!(m.depth >= 0.0 && m.depth <= 1.0)) {
            throw ConfigError("modulation: depth must lie in [0, 1]");
          }
          if (!std::isfinite(m.phase)) throw ConfigError("modulation: phase must be finite");
        } else if constexpr (std::is_same_v<T, BandNoiseModulation>) {
          positive(m.mean_intensity, "mean_intensity");
          positive(m.cutoff_hz, "cutoff_hz");
          if (m.clip_level) positive(*m.clip_level, "clip_level");
          bits_ok(m.quantization_bits, "quantization_bits");
        } else {
          positive(m.frequency_hz, "frequency_hz");
          if (!(m.v_pp >= 0.0) || !std::isfinite(m.v_pp)) {
            throw ConfigError("modulation: v_pp must be nonnegative");
          }
          bits_ok(m.drive_bits, "drive_bits");
          if (m.drive_bits && m.v_pp == 0.0) {
            throw ConfigError("modulation: drive_bits needs v_pp > 0");
          }
          positive(m.transfer.period, "transfer period");
          if (m.transfer.minimum() < 0.0) {
            throw ConfigError("modulation: transfer minimum must be nonnegative");
          }
        }
      },
      model);
}

IntensityTrace sample_intensity(const ModulationModel& model, double t0, double dt,
                                std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample_intensity: n must be at least 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sample_intensity: dt must be positive");
  if (!(t0 >= 0.0)) throw DomainError("sample_intensity: t0 must be nonnegative");
  validate(model);
  return std::visit([&](const auto& m) { return sample(m, t0, dt, n, seed); }, model);
}

G2Curve modulation_autocorrelation(const IntensityTrace& trace, double max_lag) {
  if (trace.samples.empty()) throw DomainError("modulation_autocorrelation: empty trace");
  if (!(max_lag >= 0.0) || max_lag >= 0.5 * trace.duration()) {
    throw DomainError("modulation_autocorrelation: max_lag must be below half the duration");
  }
  const double mean = mean_of(trace.samples);
  if (!(mean > 0.0)) throw DegenerateInputError("modulation_autocorrelation: zero mean");

  const auto max_k = static_cast<std::size_t>(std::floor(max_lag / trace.dt + 1e-9));
  const auto products = spectral::lag_products(trace.samples, max_k);

  G2Curve curve;
  curve.lag.resize(max_k + 1);
  curve.value.resize(max_k + 1);
  curve.stderr_.assign(max_k + 1, 0.0);
  const double mean_sq = mean * mean;
  for (std::size_t k = 0; k <= max_k; ++k) {
    curve.lag[k] = trace.dt * static_cast<double>(k);
    curve.value[k] = products[k] / mean_sq;
  }
  return curve;
}

void write_trace_csv(std::ostream& out, const IntensityTrace& trace) {
  out << "t_s,intensity\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    fmt::print(out, "{:.12e},{:.12e}\n", trace.time(i), trace.samples[i]);
  }
}

void clip_samples(std::vector<double>& samples, double level) {
  for (auto& s : samples) s = std::min(s, level);
}

void quantize_samples(std::vector<double>& samples, int bits) {
  if (samples.empty()) return;
  const double top = *std::max_element(samples.begin(), samples.end());
  if (!(top > 0.0)) return;
  const double step = top / (std::ldexp(1.0, bits) - 1.0);
  for (auto& s : samples) s = std::round(s / step) * step;
}

}  // namespace superbunch
