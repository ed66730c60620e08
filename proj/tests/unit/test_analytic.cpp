#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "superbunch/analytic.hpp"
#include "superbunch/errors.hpp"
#include "superbunch/fit.hpp"
#include "superbunch/rng.hpp"

using namespace superbunch;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDw = 2 * kPi * 1e4;

G2Curve synthetic(const TheoryModel& m, double span, std::size_t points, double noise,
                  std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  G2Curve c;
  for (std::size_t i = 0; i < points; ++i) {
    const double tau = -span + 2 * span * (static_cast<double>(i) + 0.5) / points;
    const double g = m(tau);
    c.lag.push_back(tau);
    c.value.push_back(g * (1.0 + noise * gauss(rng)));
    c.stderr_.push_back(noise * g);
  }
  return c;
}

}  // namespace

TEST(Sinc, SeriesAndDerivative) {
  EXPECT_EQ(sinc(0.0), 1.0);
  for (double x : {1e-6, 5e-5, 9.9e-5, 1.01e-4, 1e-3, 0.5, 3.0, -2.0}) {
    EXPECT_NEAR(sinc(x), std::sin(x) / x, 1e-15) << x;
    EXPECT_NEAR(sinc_derivative(x),
                oracle::derivative([](double y) { return sinc(y); }, x, 1e-3), 1e-10)
        << x;
  }
  EXPECT_EQ(sinc_derivative(0.0), 0.0);
}

TEST(ClosedForms, SpeckleValues) {
  EXPECT_DOUBLE_EQ(g2_speckle(0.0, kDw), 2.0);
  EXPECT_NEAR(g2_speckle(2 * kPi / kDw, kDw), 1.0, 1e-15);
  EXPECT_NEAR(g2_speckle(1.0, kDw), 1.0, 1e-8);
}

TEST(ClosedForms, SinusoidValues) {
  EXPECT_DOUBLE_EQ(g2_sinusoid(0.0, 1.0, 2 * kPi * 5e4, kDw), 3.0);
  for (double tau : {0.0, 1e-6, 3.7e-5, 2e-4}) {
    EXPECT_DOUBLE_EQ(g2_sinusoid(tau, 0.0, 2 * kPi * 5e4, kDw), g2_speckle(tau, kDw));
  }
  EXPECT_NEAR(g2_sinusoid(0.0, 0.94, 1.0, kDw), 2.0 + 1.88 / 1.94, 1e-12);
  EXPECT_NEAR(g2_sinusoid(0.0, 0.94, 1.0, kDw), 2.969, 5e-4);
}

TEST(ClosedForms, ZeroLagSinusoid) {
  EXPECT_DOUBLE_EQ(g2_zero_sinusoid(0.0), 2.0);
  EXPECT_DOUBLE_EQ(g2_zero_sinusoid(1.0), 3.0);
  EXPECT_NEAR(g2_zero_sinusoid(0.5), 2.6667, 1e-4);
  double prev = g2_zero_sinusoid(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double v = g2_zero_sinusoid(i / 1000.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(ClosedForms, NoiseValues) {
  const double nu0 = 200.0;
  EXPECT_DOUBLE_EQ(gamma_noise(0.0, nu0), 2.0);
  EXPECT_NEAR(gamma_noise(1 / nu0, nu0), 1.0, 1e-15);
  EXPECT_NEAR(gamma_noise(0.5 / nu0, nu0), 1.0 + std::pow(2 / kPi, 2), 1e-12);
  EXPECT_NEAR(gamma_noise(0.5 / nu0, nu0), 1.405, 1e-3);
  EXPECT_DOUBLE_EQ(g2_noise(0.0, nu0, kDw), 4.0);
  EXPECT_NEAR(g2_noise(100.0, nu0, kDw), 1.0, 1e-8);
  // nu0 tau = 1 and dw tau / 2 = pi together.
  const double tau = 1 / nu0;
  EXPECT_NEAR(g2_noise(tau, nu0, 2 * kPi / tau), 1.0, 1e-15);
}

TEST(ClosedForms, FactorizationIdentity) {
  for (double c : {0.0, 0.3, 1.0}) {
    for (double tau = -3e-4; tau <= 3e-4; tau += 1.7e-6) {
      const double w0 = 2 * kPi * 5e4;
      const double lhs = g2_sinusoid(tau, c, w0, kDw) * (1 + c);
      const double rhs = (1 + 2 * c * std::pow(std::cos(w0 * tau / 2), 2)) * g2_speckle(tau, kDw);
      EXPECT_NEAR(lhs, rhs, 1e-12);
    }
  }
}

TEST(ClosedForms, NoiseLimitIsSpeckle) {
  const double tau = 3e-5;
  for (double nu0 : {1e5, 1e6, 1e7}) {
    const double bound = g2_speckle(tau, kDw) / std::pow(kPi * nu0 * tau, 2);
    EXPECT_LE(std::abs(g2_noise(tau, nu0, kDw) - g2_speckle(tau, kDw)), bound);
  }
}

TEST(ClosedForms, PeakToPlateauStructure) {
  // Unnormalized sinusoid form at C = 1: peak 6, far-lag mean 2.
  const double w0 = 2 * kPi * 5e4;
  auto raw = [&](double tau) {
    return (1 + 2 * std::pow(std::cos(w0 * tau / 2), 2)) * (1 + oracle::sinc_sq(kDw * tau / 2));
  };
  EXPECT_DOUBLE_EQ(raw(0.0), 6.0);
  double far = 0.0, far_norm = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double tau = 1.0 + (i + 0.5) / n * (100 * 2 * kPi / w0);  // 100 whole periods
    far += raw(tau);
    far_norm += g2_sinusoid(tau, 1.0, w0, kDw);
  }
  EXPECT_NEAR(far / n, 2.0, 1e-6);
  EXPECT_NEAR(g2_sinusoid(0.0, 1.0, w0, kDw) / (far_norm / n), 3.0, 1e-6);
}

TEST(TheoryModel, ParametersRoundTrip) {
  const auto m = TheoryModel::sinusoid_speckle(0.4, 2e5, kDw);
  const auto names = m.parameter_names();
  ASSERT_EQ(names.size(), 3u);
  EXPECT_EQ(names[0], "C");
  const auto p = m.parameters();
  const auto back = m.with_parameters(p);
  EXPECT_EQ(back.depth, 0.4);
  EXPECT_EQ(back.omega0, 2e5);
  EXPECT_THROW(TheoryModel::sinusoid_speckle(1.2, 1.0, 1.0).validate(), DomainError);
  EXPECT_THROW(TheoryModel::noise_speckle(-1.0, 1.0).validate(), DomainError);
  EXPECT_EQ(to_string(TheoryKind::NoiseSpeckle), "noise");
}

TEST(TheoryModel, JacobianMatchesFiniteDifferences) {
  Rng rng(2718);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<TheoryModel> models = {
        TheoryModel::speckle_only(uniform(1e4, 1e5)),
        TheoryModel::sinusoid_speckle(uniform(0.05, 0.95), uniform(1e5, 1e6), uniform(1e4, 1e5)),
        TheoryModel::noise_speckle(uniform(50, 500), uniform(1e4, 1e5)),
    };
    for (const auto& m : models) {
      const double tau = m.kind == TheoryKind::NoiseSpeckle ? uniform(-5e-3, 5e-3)
                                                            : uniform(-1e-4, 1e-4);
      const auto p = m.parameters();
      std::vector<double> grad(p.size());
      const double value = m.evaluate(tau, grad);
      EXPECT_DOUBLE_EQ(value, m(tau));
      for (std::size_t j = 0; j < p.size(); ++j) {
        auto f = [&](double x) {
          auto q = p;
          q[j] = x;
          return m.with_parameters(q)(tau);
        };
        const double h = 1e-4 * std::abs(p[j]);
        const double fd = oracle::derivative(f, p[j], h);
        const double scale = std::max(std::abs(fd), 1e-3 * std::abs(value / p[j]));
        EXPECT_LT(std::abs(grad[j] - fd) / scale, 1e-6)
            << to_string(m.kind) << " param " << j << " tau " << tau;
      }
    }
  }
}

TEST(Fit, SinusoidRoundTrip) {
  const auto truth = TheoryModel::sinusoid_speckle(0.8, 2 * kPi * 5e4, kDw);
  const auto curve = synthetic(truth, 200e-6, 400, 0.01, 1);
  FitSpec spec;
  spec.initial = TheoryModel::sinusoid_speckle(0.6, 2 * kPi * 5.05e4, 1.2 * kDw);
  const auto fit = fit_g2(curve, spec);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.model.depth, 0.8, 0.8 * 0.02);
  EXPECT_NEAR(fit.model.omega0, 2 * kPi * 5e4, 2 * kPi * 5e4 * 0.01);
  EXPECT_LT(fit.reduced_chi_square(), 1.3);
  EXPECT_GT(fit.g2_zero_sigma(), 0.0);
  for (const auto& p : fit.parameters) EXPECT_GE(p.sigma, 0.0);
}

TEST(Fit, NoiseRoundTrip) {
  const auto truth = TheoryModel::noise_speckle(200.0, kDw);
  const auto curve = synthetic(truth, 10e-3, 1000, 0.01, 2);
  FitSpec spec;
  spec.initial = TheoryModel::noise_speckle(150.0, 0.7 * kDw);
  const auto fit = fit_g2(curve, spec);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.model.nu0, 200.0, 200.0 * 0.02);
}

TEST(Fit, BinAveragedModel) {
  // Curve built from bin-averaged values; fitting with the same bin width is unbiased.
  const auto truth = TheoryModel::speckle_only(kDw);
  const double w = 20e-6;
  G2Curve c;
  for (int b = -20; b < 20; ++b) {
    const double center = (b + 0.5) * w;
    double acc = 0.0;
    const int n = 2000;
    for (int k = 0; k < n; ++k) acc += truth(center - w / 2 + w * (k + 0.5) / n);
    c.lag.push_back(center);
    c.value.push_back(acc / n);
    c.stderr_.push_back(1e-3);
  }
  FitSpec spec;
  spec.initial = TheoryModel::speckle_only(1.3 * kDw);
  spec.bin_width = w;
  const auto fit = fit_g2(c, spec);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.model.delta_omega, kDw, kDw * 1e-4);
  EXPECT_NEAR(fit.g2_zero(), 2.0, 1e-3);
}

TEST(Fit, FlatCurveGivesZeroDepth) {
  G2Curve flat;
  Rng rng(3);
  std::normal_distribution<double> gauss(0.0, 0.01);
  for (int i = 0; i < 200; ++i) {
    flat.lag.push_back(-200e-6 + 2e-6 * (i + 0.5));
    flat.value.push_back(1.0 + gauss(rng));
    flat.stderr_.push_back(0.01);
  }
  FitSpec spec;
  spec.initial = TheoryModel::sinusoid_speckle(0.5, 2 * kPi * 5e4, kDw);
  spec.fixed = {"amplitude"};
  const auto fit = fit_g2(flat, spec);
  const auto& c = fit.parameter("C");
  EXPECT_LE(c.value, std::max(3 * c.sigma, 1e-3));
  EXPECT_FALSE(fit.parameter("amplitude").free);
}

TEST(Fit, InputErrors) {
  const auto truth = TheoryModel::speckle_only(kDw);
  auto curve = synthetic(truth, 100e-6, 12, 0.01, 4);
  FitSpec spec;
  spec.initial = truth;
  EXPECT_THROW(fit_g2(curve, spec), DomainError);  // 12 < 5 x 3
  curve = synthetic(truth, 100e-6, 100, 0.01, 4);
  spec.initial = TheoryModel::sinusoid_speckle(1.5, 1.0, kDw);
  EXPECT_THROW(fit_g2(curve, spec), DomainError);
  spec.initial = truth;
  spec.fixed = {"bogus"};
  EXPECT_THROW(fit_g2(curve, spec), DomainError);
  spec.fixed = {};
  curve.stderr_[5] = 0.0;
  EXPECT_THROW(fit_g2(curve, spec), DomainError);
}

TEST(Fit, SingularNormalEquations) {
  // Every point at the same lag: amplitude, offset and bandwidth are not separable.
  G2Curve c;
  for (int i = 0; i < 50; ++i) {
    c.lag.push_back(10e-6);
    c.value.push_back(1.8);
    c.stderr_.push_back(0.01);
  }
  FitSpec spec;
  spec.initial = TheoryModel::speckle_only(kDw);
  EXPECT_FALSE(fit_g2(c, spec).converged);
}

TEST(Fit, IterationCapClearsConvergence) {
  const auto truth = TheoryModel::noise_speckle(200.0, kDw);
  const auto curve = synthetic(truth, 10e-3, 500, 0.01, 5);
  FitSpec spec;
  spec.initial = TheoryModel::noise_speckle(120.0, 0.5 * kDw);
  spec.max_iterations = 1;
  const auto fit = fit_g2(curve, spec);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 1);
}

TEST(Fit, ReportFormat) {
  const auto truth = TheoryModel::speckle_only(kDw);
  FitSpec spec;
  spec.initial = truth;
  spec.fixed = {"offset"};
  const auto fit = fit_g2(synthetic(truth, 100e-6, 100, 0.01, 6), spec);
  std::ostringstream out;
  write_fit_report(out, fit);
  const auto text = out.str();
  EXPECT_NE(text.find("parameter value sigma\n"), std::string::npos);
  EXPECT_NE(text.find("delta_omega "), std::string::npos);
  EXPECT_NE(text.find("offset 0.0000000000e+00 fixed"), std::string::npos);
  EXPECT_NE(text.find("g2_zero "), std::string::npos);
}
