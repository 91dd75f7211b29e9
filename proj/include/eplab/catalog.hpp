#pragma once

#include <cmath>
#include <numbers>

#include "eplab/grid_spec.hpp"

namespace eplab {

// Value and first two derivatives of a one-variable function at a point.
struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Catalog potential evaluated along the coordinate it depends on
/// (arc length for circle, position for interval, r for radial surfaces).
inline Jet weight_jet(const WeightSpec& w, double x, double period = 0.0) {
  const double a = w.a;
  if (w.id == "quadratic") return {0.5 * a * x * x, a * x, a};
  if (w.id == "linear") return {a * x, a, 0.0};
  if (w.id == "cosine") {
    const double k = 2.0 * std::numbers::pi / period;
    return {a * std::cos(k * x), -a * k * std::sin(k * x), -a * k * k * std::cos(k * x)};
  }
  return {};
}

/// Warp profile psi(r) with derivatives.
inline Jet profile_jet(const ProfileSpec& p, double r) {
  if (p.id == "sphere") return {std::sin(r), std::cos(r), -std::sin(r)};
  if (p.id == "cone") return {p.beta * r, p.beta, 0.0};
  return {r, 1.0, 0.0};
}

/// Integral of psi from 0 to r.
inline double profile_area(const ProfileSpec& p, double r) {
  if (p.id == "sphere") return 1.0 - std::cos(r);
  if (p.id == "cone") return 0.5 * p.beta * r * r;
  return 0.5 * r * r;
}

/// Gauss curvature -psi''/psi of the warped surface (closed form, regular at the pole).
inline double profile_gauss_curvature(const ProfileSpec& p) { return p.id == "sphere" ? 1.0 : 0.0; }

/// psi'(r)/psi(r).
inline double profile_log_derivative(const ProfileSpec& p, double r) {
  if (p.id == "sphere") return std::cos(r) / std::sin(r);
  return 1.0 / r;
}

}  // namespace eplab
