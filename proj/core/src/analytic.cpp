#include "superbunch/analytic.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <numbers>
#include <ostream>

#include "superbunch/errors.hpp"

namespace superbunch {
namespace {

constexpr double kPi = std::numbers::pi;

// 1 + sinc^2(k tau) and its derivative with respect to k.
struct SincSquareFactor {
  double value;
  double d_rate;
};

SincSquareFactor sinc_square_factor(double rate, double tau) {
  const double x = rate * tau;
  const double s = sinc(x);
  return {1.0 + s * s, 2.0 * s * sinc_derivative(x) * tau};
}

void require_depth(double depth) {
  if (!(depth >= 0.0 && depth <= 1.0)) throw DomainError("modulation depth must lie in [0, 1]");
}

}  // namespace

double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double sinc_derivative(double x) {
  if (std::abs(x) < 1e-3) return -x / 3.0 + x * x * x / 30.0;
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

double g2_speckle(double tau, double delta_omega) {
  const double s = sinc(0.5 * delta_omega * tau);
  return 1.0 + s * s;
}

double g2_sinusoid(double tau, double depth, double omega0, double delta_omega) {
  require_depth(depth);
  const double c = std::cos(0.5 * omega0 * tau);
  return (1.0 + 2.0 * depth * c * c) / (1.0 + depth) * g2_speckle(tau, delta_omega);
}

double g2_zero_sinusoid(double depth) {
  require_depth(depth);
  return 2.0 + 2.0 * depth / (1.0 + depth);
}

double gamma_noise(double tau, double nu0) {
  if (!(nu0 > 0.0)) throw DomainError("gamma_noise: nu0 must be positive");
  const double s = sinc(kPi * nu0 * tau);
  return 1.0 + s * s;
}

double g2_noise(double tau, double nu0, double delta_omega) {
  return gamma_noise(tau, nu0) * g2_speckle(tau, delta_omega);
}

TheoryModel TheoryModel::speckle_only(double delta_omega) {
  return {TheoryKind::SpeckleOnly, delta_omega, 0.0, 0.0, 0.0};
}

TheoryModel TheoryModel::sinusoid_speckle(double depth, double omega0, double delta_omega) {
  return {TheoryKind::SinusoidSpeckle, delta_omega, depth, omega0, 0.0};
}

TheoryModel TheoryModel::noise_speckle(double nu0, double delta_omega) {
  return {TheoryKind::NoiseSpeckle, delta_omega, 0.0, 0.0, nu0};
}

void TheoryModel::validate() const {
  if (!(delta_omega > 0.0)) throw DomainError("theory: delta_omega must be positive");
  if (kind == TheoryKind::SinusoidSpeckle) {
    require_depth(depth);
    if (!(omega0 > 0.0)) throw DomainError("theory: omega0 must be positive");
  }
  if (kind == TheoryKind::NoiseSpeckle && !(nu0 > 0.0)) {
    throw DomainError("theory: nu0 must be positive");
  }
}

double TheoryModel::operator()(double tau) const {
  switch (kind) {
    case TheoryKind::SpeckleOnly:
      return g2_speckle(tau, delta_omega);
    case TheoryKind::SinusoidSpeckle:
      return g2_sinusoid(tau, depth, omega0, delta_omega);
    case TheoryKind::NoiseSpeckle:
      return g2_noise(tau, nu0, delta_omega);
  }
  return 0.0;
}

std::vector<std::string_view> TheoryModel::parameter_names() const {
  switch (kind) {
    case TheoryKind::SpeckleOnly:
      return {"delta_omega"};
    case TheoryKind::SinusoidSpeckle:
      return {"C", "omega0", "delta_omega"};
    case TheoryKind::NoiseSpeckle:
      return {"nu0", "delta_omega"};
  }
  return {};
}

std::vector<double> TheoryModel::parameters() const {
  switch (kind) {
    case TheoryKind::SpeckleOnly:
      return {delta_omega};
    case TheoryKind::SinusoidSpeckle:
      return {depth, omega0, delta_omega};
    case TheoryKind::NoiseSpeckle:
      return {nu0, delta_omega};
  }
  return {};
}

TheoryModel TheoryModel::with_parameters(std::span<const double> v) const {
  if (v.size() != parameter_names().size()) {
    throw DomainError("theory: wrong number of parameters");
  }
  TheoryModel m = *this;
  switch (kind) {
    case TheoryKind::SpeckleOnly:
      m.delta_omega = v[0];
      break;
    case TheoryKind::SinusoidSpeckle:
      m.depth = v[0];
      m.omega0 = v[1];
      m.delta_omega = v[2];
      break;
    case TheoryKind::NoiseSpeckle:
      m.nu0 = v[0];
      m.delta_omega = v[1];
      break;
  }
  return m;
}

double TheoryModel::evaluate(double tau, std::span<double> gradient) const {
  const auto speckle = sinc_square_factor(0.5 * delta_omega, tau);
  const double d_speckle_d_dw = 0.5 * speckle.d_rate;

  switch (kind) {
    case TheoryKind::SpeckleOnly:
      gradient[0] = d_speckle_d_dw;
      return speckle.value;

    case TheoryKind::SinusoidSpeckle: {
      const double one_plus_c = 1.0 + depth;
      const double cos_half = std::cos(0.5 * omega0 * tau);
      const double modulation = (1.0 + 2.0 * depth * cos_half * cos_half) / one_plus_c;
      const double d_mod_d_c = std::cos(omega0 * tau) / (one_plus_c * one_plus_c);
      const double d_mod_d_w0 = -depth * std::sin(omega0 * tau) * tau / one_plus_c;
      gradient[0] = d_mod_d_c * speckle.value;
      gradient[1] = d_mod_d_w0 * speckle.value;
      gradient[2] = modulation * d_speckle_d_dw;
      return modulation * speckle.value;
    }

    case TheoryKind::NoiseSpeckle: {
      const auto noise = sinc_square_factor(kPi * nu0, tau);
      gradient[0] = kPi * noise.d_rate * speckle.value;
      gradient[1] = noise.value * d_speckle_d_dw;
      return noise.value * speckle.value;
    }
  }
  return 0.0;
}

std::string_view to_string(TheoryKind kind) {
  switch (kind) {
    case TheoryKind::SpeckleOnly:
      return "speckle";
    case TheoryKind::SinusoidSpeckle:
      return "sinusoid";
    case TheoryKind::NoiseSpeckle:
      return "noise";
  }
  return "unknown";
}

void write_theory_csv(std::ostream& out, std::span<const double> lags,
                      const std::vector<double>& values) {
  out << "tau_s,g2_theory\n";
  for (std::size_t i = 0; i < lags.size(); ++i) {
    fmt::print(out, "{:.10e},{:.10e}\n", lags[i], values[i]);
  }
}

}  // namespace superbunch
