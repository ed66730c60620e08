#include "superbunch/fit.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "superbunch/errors.hpp"

namespace superbunch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 4-point Gauss-Legendre on [-1, 1].
constexpr double kNodes[] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                             0.8611363115940526};
constexpr double kWeights[] = {0.3478548451374539, 0.6521451548625461, 0.6521451548625461,
                               0.3478548451374539};

struct Layout {
  TheoryModel shape;
  std::size_t physical = 0;  // number of physical parameters
  std::vector<std::string> names;
  std::vector<double> lower;
  std::vector<double> upper;
};

Layout make_layout(const FitSpec& spec) {
  Layout layout;
  layout.shape = spec.initial;
  for (auto name : spec.initial.parameter_names()) {
    layout.names.emplace_back(name);
    if (name == "C") {
      layout.lower.push_back(0.0);
      layout.upper.push_back(1.0);
    } else {
      layout.lower.push_back(std::numeric_limits<double>::min());
      layout.upper.push_back(kInf);
    }
  }
  layout.physical = layout.names.size();
  layout.names.emplace_back("amplitude");
  layout.names.emplace_back("offset");
  for (int k = 0; k < 2; ++k) {
    layout.lower.push_back(-kInf);
    layout.upper.push_back(kInf);
  }
  return layout;
}

// offset + amplitude * <model> and its gradient over all parameters.
double model_value(const Layout& layout, const std::vector<double>& p, double tau,
                   double bin_width, std::vector<double>& grad) {
  const std::size_t np = layout.physical;
  const TheoryModel model =
      layout.shape.with_parameters(std::span<const double>(p.data(), np));
  const double amplitude = p[np];
  const double offset = p[np + 1];

  std::vector<double> local(np);
  double shape = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  if (bin_width > 0.0) {
    for (int k = 0; k < 4; ++k) {
      const double w = 0.5 * kWeights[k];
      shape += w * model.evaluate(tau + 0.5 * bin_width * kNodes[k], local);
      for (std::size_t j = 0; j < np; ++j) grad[j] += w * local[j];
    }
  } else {
    shape = model.evaluate(tau, local);
    for (std::size_t j = 0; j < np; ++j) grad[j] = local[j];
  }
  for (std::size_t j = 0; j < np; ++j) grad[j] *= amplitude;
  grad[np] = shape;
  grad[np + 1] = 1.0;
  return offset + amplitude * shape;
}

}  // namespace

const FittedParameter& FitResult::parameter(std::string_view name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p;
  }
  throw DomainError(fmt::format("fit: no parameter named {}", name));
}

double FitResult::evaluate(double tau) const { return offset + amplitude * model(tau); }

double FitResult::g2_zero_sigma() const {
  const std::size_t nf = free_index.size();
  if (nf == 0) return 0.0;
  std::vector<double> grad_all(parameters.size());
  std::vector<double> physical(parameters.size() - 2);
  const double shape = model.evaluate(0.0, physical);
  for (std::size_t j = 0; j < physical.size(); ++j) grad_all[j] = amplitude * physical[j];
  grad_all[parameters.size() - 2] = shape;
  grad_all[parameters.size() - 1] = 1.0;

  double var = 0.0;
  for (std::size_t a = 0; a < nf; ++a) {
    for (std::size_t b = 0; b < nf; ++b) {
      const double ga = grad_all[free_index[a]];
      const double gb = grad_all[free_index[b]];
      if (ga != 0.0 && gb != 0.0) var += ga * covariance[a * nf + b] * gb;
    }
  }
  return std::sqrt(std::max(var, 0.0));
}

double FitResult::reduced_chi_square() const {
  return dof > 0 ? chi_square / static_cast<double>(dof) : kInf;
}

FitResult fit_g2(const G2Curve& curve, const FitSpec& spec) {
  spec.initial.validate();
  const Layout layout = make_layout(spec);
  const std::size_t np = layout.names.size();

  std::vector<double> p = spec.initial.parameters();
  p.push_back(spec.amplitude);
  p.push_back(spec.offset);

  std::vector<bool> is_free(np, true);
  for (const auto& name : spec.fixed) {
    auto it = std::find(layout.names.begin(), layout.names.end(), name);
    if (it == layout.names.end()) {
      throw DomainError(fmt::format("fit: unknown parameter `{}`", name));
    }
    is_free[static_cast<std::size_t>(it - layout.names.begin())] = false;
  }
  std::vector<std::size_t> free_index;
  for (std::size_t j = 0; j < np; ++j) {
    if (is_free[j]) free_index.push_back(j);
    if (p[j] < layout.lower[j] || p[j] > layout.upper[j]) {
      throw DomainError(fmt::format("fit: initial {} outside its bounds", layout.names[j]));
    }
  }
  const std::size_t nf = free_index.size();
  const std::size_t m = curve.size();
  if (curve.value.size() != m || curve.stderr_.size() != m) {
    throw DomainError("fit: curve arrays differ in length");
  }
  if (m < std::max<std::size_t>(nf, 1) * 5) {
    throw DomainError(fmt::format("fit: {} points is fewer than five per free parameter ({})",
                                  m, nf));
  }
  for (double s : curve.stderr_) {
    if (!(s > 0.0)) throw DomainError("fit: every point needs a positive standard error");
  }

  Eigen::MatrixXd jac(m, nf);
  Eigen::VectorXd res(m);
  std::vector<double> grad(np);

  auto evaluate_all = [&](const std::vector<double>& params, bool with_jacobian) {
    double chi2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double model = model_value(layout, params, curve.lag[i], spec.bin_width, grad);
      const double inv_sigma = 1.0 / curve.stderr_[i];
      res[static_cast<Eigen::Index>(i)] = (curve.value[i] - model) * inv_sigma;
      chi2 += res[static_cast<Eigen::Index>(i)] * res[static_cast<Eigen::Index>(i)];
      if (with_jacobian) {
        for (std::size_t k = 0; k < nf; ++k) {
          jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
              grad[free_index[k]] * inv_sigma;
        }
      }
    }
    return chi2;
  };

  FitResult out;
  double chi2 = evaluate_all(p, true);
  double damping = 1e-3;
  bool singular = false;

  auto at_lower = [&](std::size_t k) { return p[free_index[k]] <= layout.lower[free_index[k]]; };
  auto at_upper = [&](std::size_t k) { return p[free_index[k]] >= layout.upper[free_index[k]]; };

  for (out.iterations = 0; out.iterations < spec.max_iterations && nf > 0;) {
    ++out.iterations;
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd gradient = jac.transpose() * res;
    const Eigen::VectorXd diag = normal.diagonal();
    const double diag_max = diag.maxCoeff();
    if (!(diag_max > 0.0)) {
      singular = true;
      break;
    }

    // Active set: drop parameters with no leverage and those pinned by a bound.
    std::vector<Eigen::Index> active;
    for (std::size_t k = 0; k < nf; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (!(diag[kk] > 1e-14 * diag_max)) continue;
      if (at_lower(k) && gradient[kk] <= 0.0) continue;
      if (at_upper(k) && gradient[kk] >= 0.0) continue;
      active.push_back(kk);
    }
    if (active.empty()) {
      out.converged = true;
      break;
    }
    const auto na = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd sub(na, na);
    Eigen::VectorXd sub_grad(na);
    Eigen::VectorXd sub_diag(na);
    for (Eigen::Index a = 0; a < na; ++a) {
      sub_grad[a] = gradient[active[a]];
      sub_diag[a] = diag[active[a]];
      for (Eigen::Index b = 0; b < na; ++b) sub(a, b) = normal(active[a], active[b]);
    }

    bool accepted = false;
    bool small_step = false;
    while (damping < 1e12) {
      Eigen::MatrixXd damped = sub;
      damped.diagonal() += damping * sub_diag;
      const Eigen::VectorXd step = damped.ldlt().solve(sub_grad);
      if (!step.allFinite()) {
        damping *= 10.0;
        continue;
      }
      std::vector<double> trial = p;
      double max_rel = 0.0;
      for (Eigen::Index a = 0; a < na; ++a) {
        const std::size_t j = free_index[static_cast<std::size_t>(active[a])];
        trial[j] = std::clamp(p[j] + step[a], layout.lower[j], layout.upper[j]);
        const double change = std::abs(trial[j] - p[j]);
        max_rel = std::max(max_rel, change / std::max(std::abs(p[j]), spec.tolerance));
      }
      const double trial_chi2 = evaluate_all(trial, false);
      if (trial_chi2 <= chi2) {
        p = trial;
        chi2 = evaluate_all(p, true);
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
        small_step = max_rel < spec.tolerance;
        break;
      }
      // A rejected step that barely moves the parameters means we sit at the minimum.
      if (max_rel < spec.tolerance) {
        small_step = true;
        break;
      }
      damping *= 10.0;
    }
    if (small_step || !accepted) {
      out.converged = true;
      break;
    }
  }
  if (nf == 0) out.converged = true;

  // Covariance from the undamped normal matrix at the solution. Parameters pinned at a
  // bound get an uncorrelated curvature error; parameters with no leverage get infinity.
  out.covariance.assign(nf * nf, 0.0);
  if (nf > 0 && !singular) {
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd gradient = jac.transpose() * res;
    const Eigen::VectorXd diag = normal.diagonal();
    const double diag_max = diag.maxCoeff();
    std::vector<Eigen::Index> inner;
    for (std::size_t k = 0; k < nf; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (!(diag[kk] > 1e-14 * diag_max)) {
        out.covariance[k * nf + k] = kInf;
      } else if ((at_lower(k) && gradient[kk] <= 0.0) || (at_upper(k) && gradient[kk] >= 0.0)) {
        out.covariance[k * nf + k] = 1.0 / diag[kk];
      } else {
        inner.push_back(kk);
      }
    }
    const auto ni = static_cast<Eigen::Index>(inner.size());
    if (ni > 0) {
      Eigen::MatrixXd sub(ni, ni);
      for (Eigen::Index a = 0; a < ni; ++a) {
        for (Eigen::Index b = 0; b < ni; ++b) sub(a, b) = normal(inner[a], inner[b]);
      }
      const Eigen::VectorXd d = sub.diagonal().cwiseSqrt();
      const Eigen::MatrixXd scaled =
          d.cwiseInverse().asDiagonal() * sub * d.cwiseInverse().asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
      if (eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().maxCoeff()) {
        const Eigen::MatrixXd cov =
            d.cwiseInverse().asDiagonal() * scaled.inverse() * d.cwiseInverse().asDiagonal();
        for (Eigen::Index a = 0; a < ni; ++a) {
          for (Eigen::Index b = 0; b < ni; ++b) {
            out.covariance[static_cast<std::size_t>(inner[a]) * nf +
                           static_cast<std::size_t>(inner[b])] = cov(a, b);
          }
        }
      } else {
        singular = true;
      }
    }
  }
  if (singular) {
    out.converged = false;
    out.covariance.assign(nf * nf, kInf);
  }

  out.model = layout.shape.with_parameters(std::span<const double>(p.data(), layout.physical));
  out.amplitude = p[layout.physical];
  out.offset = p[layout.physical + 1];
  out.free_index = free_index;
  out.chi_square = chi2;
  out.dof = m > nf ? m - nf : 0;
  for (std::size_t j = 0; j < np; ++j) {
    FittedParameter fp;
    fp.name = layout.names[j];
    fp.value = p[j];
    fp.free = is_free[j];
    fp.at_bound = p[j] <= layout.lower[j] || p[j] >= layout.upper[j];
    fp.sigma = 0.0;
    if (fp.free) {
      const auto k = static_cast<std::size_t>(
          std::find(free_index.begin(), free_index.end(), j) - free_index.begin());
      fp.sigma = std::sqrt(out.covariance[k * nf + k]);
    }
    out.parameters.push_back(fp);
  }
  return out;
}

void write_fit_report(std::ostream& out, const FitResult& fit) {
  fmt::print(out, "# model {}\n", to_string(fit.model.kind));
  fmt::print(out, "# converged {} iterations {}\n", fit.converged ? "true" : "false",
             fit.iterations);
  fmt::print(out, "# chi_square {:.6e} dof {}\n", fit.chi_square, fit.dof);
  out << "parameter value sigma\n";
  for (const auto& p : fit.parameters) {
    if (p.free) {
      fmt::print(out, "{} {:.10e} {:.10e}\n", p.name, p.value, p.sigma);
    } else {
      fmt::print(out, "{} {:.10e} fixed\n", p.name, p.value);
    }
  }
  fmt::print(out, "g2_zero {:.10e} {:.10e}\n", fit.g2_zero(), fit.g2_zero_sigma());
}

}  // namespace superbunch
