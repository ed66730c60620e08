#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace superbunch {

/// Normalized correlation samples g(tau) with standard errors.
/// Trace-level estimators leave `stderr_` at zero.
struct G2Curve {
  std::vector<double> lag;      // s
  std::vector<double> value;    // dimensionless
  std::vector<double> stderr_;  // dimensionless, >= 0

  std::size_t size() const { return lag.size(); }
};

/// CSV with header `tau_s,g2,stderr`.
void write_g2_csv(std::ostream& out, const G2Curve& curve);

}  // namespace superbunch
