#pragma once

namespace eplab {

/// Constant C in eps = C (dt + h^2) / t * scale, calibrated on the Euclidean
/// Gaussian trace and shared by every inequality and identity check.
inline constexpr double kToleranceConstant = 1.0;

/// Discretisation tolerance for a quantity whose terms have magnitude `scale`
/// at time t. The ratio (dt + h^2) / t is the relative error of the heat
/// solution at time t for first order time and second order space stepping.
inline double discretization_tolerance(double C, double dt, double h, double t, double scale) {
  return C * (dt + h * h) / t * scale;
}

}  // namespace eplab
