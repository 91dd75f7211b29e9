#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "eplab/error.hpp"

namespace eplab {

enum class GridKind { circle, interval, torus2d, radial_surface, icosphere };
enum class Boundary { periodic, reflecting };

inline const char* to_string(GridKind k) {
  switch (k) {
    case GridKind::circle: return "circle";
    case GridKind::interval: return "interval";
    case GridKind::torus2d: return "torus2d";
    case GridKind::radial_surface: return "radial_surface";
    case GridKind::icosphere: return "icosphere";
  }
  return "?";
}

inline GridKind parse_grid_kind(const std::string& s) {
  if (s == "circle") return GridKind::circle;
  if (s == "interval") return GridKind::interval;
  if (s == "torus2d") return GridKind::torus2d;
  if (s == "radial_surface") return GridKind::radial_surface;
  if (s == "icosphere") return GridKind::icosphere;
  throw Error(Errc::unsupported_spec, "unknown grid kind '" + s + "'");
}

inline const char* to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "reflecting"; }

inline Boundary parse_boundary(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "reflecting") return Boundary::reflecting;
  throw Error(Errc::unsupported_spec, "unknown boundary '" + s + "'");
}

/// Potential phi from the built-in catalog.
///   zero      phi = 0
///   quadratic phi = a x^2 / 2     (interval; radial_surface with x = r)
///   linear    phi = a x           (interval)
///   cosine    phi = a cos(2 pi s / L)  (circle)
struct WeightSpec {
  std::string id = "zero";
  double a = 0.0;
};

/// Warp profile psi(r) for rotationally symmetric surfaces dr^2 + psi(r)^2 dtheta^2.
///   sphere  psi = sin r   (extent must be pi)
///   plane   psi = r
///   cone    psi = beta r, 0 < beta <= 1
struct ProfileSpec {
  std::string id = "sphere";
  double beta = 1.0;
};

struct GridSpec {
  GridKind kind = GridKind::circle;
  // Points per axis; for icosphere this is the subdivision level.
  int resolution = 64;
  int resolution_y = 0;  // torus2d only, 0 means "same as resolution"
  double extent = 2.0 * std::numbers::pi;
  double extent_y = 0.0;  // torus2d only, 0 means "same as extent"
  WeightSpec weight{};
  Boundary boundary = Boundary::periodic;
  ProfileSpec profile{};
  double conformal_amplitude = 0.0;  // torus2d: w0 = A (cos x + cos y)
  double m = 0.0;                    // 0 means "equal to the dimension"
  double K = 0.0;                    // declared curvature lower bound

  int dimension() const {
    return (kind == GridKind::circle || kind == GridKind::interval) ? 1 : 2;
  }
  double effective_m() const { return m > 0.0 ? m : static_cast<double>(dimension()); }
  int ny() const { return resolution_y > 0 ? resolution_y : resolution; }
  double ly() const { return extent_y > 0.0 ? extent_y : extent; }
};

inline bool is_zero_weight(const WeightSpec& w) { return w.id == "zero" || w.a == 0.0; }

inline void validate(const GridSpec& s) {
  if (s.kind == GridKind::icosphere) {
    if (s.resolution < 0 || s.resolution > 7)
      throw Error(Errc::resolution_too_low, "icosphere subdivision level must be in [0, 7]");
  } else {
    if (s.resolution < 8) throw Error(Errc::resolution_too_low, "resolution must be >= 8 per axis");
    if (s.kind == GridKind::torus2d && s.ny() < 8)
      throw Error(Errc::resolution_too_low, "resolution_y must be >= 8");
  }
  if (!(s.extent > 0.0) || !(s.ly() > 0.0)) throw Error(Errc::invalid_spec, "extent must be positive");
  const double n = s.dimension();
  const double m = s.effective_m();
  if (m < n) throw Error(Errc::invalid_spec, "effective dimension m must be >= n");
  const bool zero = is_zero_weight(s.weight);
  if (m == n && !zero)
    throw Error(Errc::dimension_mismatch, "m = n requires the zero weight");

  const std::string& id = s.weight.id;
  if (id != "zero" && id != "quadratic" && id != "linear" && id != "cosine")
    throw Error(Errc::unsupported_spec, "unknown weight id '" + id + "'");

  switch (s.kind) {
    case GridKind::circle:
      if (s.boundary != Boundary::periodic) throw Error(Errc::unsupported_spec, "circle is periodic");
      if (id != "zero" && id != "cosine")
        throw Error(Errc::unsupported_spec, "circle supports weights zero and cosine");
      break;
    case GridKind::interval:
      if (s.boundary != Boundary::reflecting)
        throw Error(Errc::unsupported_spec, "interval supports reflecting boundaries only");
      if (id == "cosine") throw Error(Errc::unsupported_spec, "cosine weight is circle-only");
      break;
    case GridKind::torus2d:
      if (s.boundary != Boundary::periodic) throw Error(Errc::unsupported_spec, "torus2d is periodic");
      if (!zero) throw Error(Errc::unsupported_spec, "torus2d supports the zero weight only");
      break;
    case GridKind::radial_surface: {
      if (id != "zero" && id != "quadratic")
        throw Error(Errc::unsupported_spec, "radial_surface supports weights zero and quadratic");
      const std::string& p = s.profile.id;
      if (p == "sphere") {
        if (std::abs(s.extent - std::numbers::pi) > 1e-12)
          throw Error(Errc::invalid_spec, "sphere profile needs extent pi");
      } else if (p == "cone") {
        if (!(s.profile.beta > 0.0 && s.profile.beta <= 1.0))
          throw Error(Errc::invalid_spec, "cone beta must lie in (0, 1]");
      } else if (p != "plane") {
        throw Error(Errc::unsupported_spec, "unknown radial profile '" + p + "'");
      }
      break;
    }
    case GridKind::icosphere:
      if (!zero) throw Error(Errc::unsupported_spec, "icosphere supports the zero weight only");
      break;
  }
}

}  // namespace eplab
