#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "superbunch/analytic.hpp"
#include "superbunch/curve.hpp"

namespace superbunch {

/// What to fit and from where. The fitted function is
///   offset + amplitude * model(tau)
/// where `model` supplies the initial physical parameters. Any parameter
/// (including "amplitude" and "offset") can be held fixed by name.
struct FitSpec {
  TheoryModel initial;
  double amplitude = 1.0;
  double offset = 0.0;
  std::vector<std::string> fixed;
  /// When positive, the model is averaged over [tau - w/2, tau + w/2] to
  /// match histogram bins of width w.
  double bin_width = 0.0;
  int max_iterations = 200;
  double tolerance = 1e-6;  // relative parameter change
};

struct FittedParameter {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;
  bool free = true;
  bool at_bound = false;
};

struct FitResult {
  TheoryModel model;
  double amplitude = 1.0;
  double offset = 0.0;
  std::vector<FittedParameter> parameters;  // physical, then amplitude, offset
  /// Covariance of the free parameters, row-major, in `parameters` order.
  std::vector<double> covariance;
  std::vector<std::size_t> free_index;  // parameters[free_index[k]] is free slot k
  double chi_square = 0.0;  // weighted residual sum of squares
  std::size_t dof = 0;
  bool converged = false;
  int iterations = 0;

  bool reliable() const { return converged; }
  const FittedParameter& parameter(std::string_view name) const;

  /// offset + amplitude * model(tau), without bin averaging.
  double evaluate(double tau) const;
  double g2_zero() const { return evaluate(0.0); }
  double g2_zero_sigma() const;
  double reduced_chi_square() const;
};

/// Weighted least squares (weights 1/stderr^2) by damped Gauss-Newton with
/// analytic Jacobians. Parameter bounds (C in [0, 1], frequencies positive)
/// are enforced by projection. Stops when the relative parameter change
/// falls below `tolerance`; hitting `max_iterations` or singular normal
/// equations leaves `converged` false.
///
/// Throws DomainError when the curve has fewer than five points per free
/// parameter, contains a nonpositive error, or the initial guess is out of bounds.
FitResult fit_g2(const G2Curve& curve, const FitSpec& spec);

/// Structured text report: one `name value sigma` line per parameter.
void write_fit_report(std::ostream& out, const FitResult& fit);

}  // namespace superbunch
