#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace superbunch {

/// sin(x)/x with sinc(0) = 1.
double sinc(double x);
/// d sinc / dx.
double sinc_derivative(double x);

/// Pseudothermal light: 1 + sinc^2(dw tau / 2).
double g2_speckle(double tau, double delta_omega);

/// Sinusoidally modulated input on the groundglass:
///   [1 + 2C cos^2(w0 tau / 2)] / (1 + C) * [1 + sinc^2(dw tau / 2)]
/// normalized so the far-lag plateau of the modulation factor averages 1.
double g2_sinusoid(double tau, double depth, double omega0, double delta_omega);

/// 2 + 2C / (1 + C).
double g2_zero_sinusoid(double depth);

/// Intensity correlation of band-limited Gaussian noise: 1 + sinc^2(pi nu0 tau).
double gamma_noise(double tau, double nu0);

/// [1 + sinc^2(pi nu0 tau)] [1 + sinc^2(dw tau / 2)].
double g2_noise(double tau, double nu0, double delta_omega);

enum class TheoryKind { SpeckleOnly, SinusoidSpeckle, NoiseSpeckle };

/// Closed-form g2 family with its physical parameters. Angular frequencies
/// in rad/s, nu0 in Hz.
struct TheoryModel {
  TheoryKind kind = TheoryKind::SpeckleOnly;
  double delta_omega = 0.0;
  double depth = 0.0;
  double omega0 = 0.0;
  double nu0 = 0.0;

  static TheoryModel speckle_only(double delta_omega);
  static TheoryModel sinusoid_speckle(double depth, double omega0, double delta_omega);
  static TheoryModel noise_speckle(double nu0, double delta_omega);

  /// Throws DomainError unless parameters are positive and C in [0, 1].
  void validate() const;

  double operator()(double tau) const;

  /// Parameter names in vector order: SpeckleOnly {delta_omega},
  /// SinusoidSpeckle {C, omega0, delta_omega}, NoiseSpeckle {nu0, delta_omega}.
  std::vector<std::string_view> parameter_names() const;
  std::vector<double> parameters() const;
  TheoryModel with_parameters(std::span<const double> values) const;

  /// Value at tau; writes d/d(parameter) into `gradient` (size = parameter count).
  double evaluate(double tau, std::span<double> gradient) const;
};

std::string_view to_string(TheoryKind kind);

/// CSV with header `tau_s,g2_theory`.
void write_theory_csv(std::ostream& out, std::span<const double> lags,
                      const std::vector<double>& values);

}  // namespace superbunch
