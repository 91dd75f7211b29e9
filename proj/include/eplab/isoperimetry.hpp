#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "eplab/error.hpp"
#include "eplab/functionals.hpp"
#include "eplab/grid_spec.hpp"
#include "eplab/manifold.hpp"

namespace eplab {

/// Asymptotic volume ratio lim V(B(x, r)) / (omega_n r^n) from the model's closed form.
inline double avr_kappa(const GridSpec& spec) {
  switch (spec.kind) {
    case GridKind::circle:
    case GridKind::torus2d:
    case GridKind::icosphere: throw Error(Errc::compact_manifold, "volume ratio is undefined on a compact model");
    case GridKind::interval:
      if (!is_zero_weight(spec.weight)) throw Error(Errc::unsupported_spec, "no closed form for weighted intervals");
      return 1.0;
    case GridKind::radial_surface:
      if (spec.profile.id == "sphere") throw Error(Errc::compact_manifold, "volume ratio is undefined on a compact model");
      if (!is_zero_weight(spec.weight)) throw Error(Errc::unsupported_spec, "no closed form for weighted surfaces");
      return spec.profile.id == "cone" ? spec.profile.beta : 1.0;
  }
  return 1.0;
}

/// Isoperimetric constant 2 pi e m kappa^{2/m}, attained by the Euclidean Gaussian.
inline double gamma_constant(double m, double kappa) { return 2.0 * std::numbers::pi * std::numbers::e * m * std::pow(kappa, 2.0 / m); }

/// The alternative normalisation 4 pi e m kappa^{2/m}, reported alongside for comparison.
inline double gamma_constant_alt(double m, double kappa) { return 2.0 * gamma_constant(m, kappa); }

/// H_m(t) = H(t) - (m/2) log(4 pi e t) per sample.
inline std::vector<double> entropy_gap(const EntropyTrace& tr, double m) {
  std::vector<double> g(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k)
    g[k] = tr.H[k] - 0.5 * m * std::log(4.0 * std::numbers::pi * std::numbers::e * tr.t[k]);
  return g;
}

/// Q(t) = N(t) I(t).
inline std::vector<double> isoperimetric_product(const EntropyTrace& tr) {
  std::vector<double> q(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) q[k] = tr.N[k] * tr.I[k];
  return q;
}

/// (m/2) log((4/gamma) int Gamma(f) dmu) - int f^2 log f^2 dmu. Zero Dirichlet
/// energy gives +inf when the entropy term is nonpositive.
inline double stam_lsi_slack(const WeightedManifold& M, std::span<const double> f, double gamma, double m) {
  Field f2(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f2[i] = f[i] * f[i];
  if (std::abs(integrate(M, f2) - 1.0) > 1e-8) throw Error(Errc::non_normalized, "f must satisfy int f^2 = 1");
  const Field g = carre_du_champ(M, f, f);
  double energy = 0.0, ent = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    energy += g[i] * M.measure[i];
    if (f2[i] > 0.0) ent += f2[i] * std::log(f2[i]) * M.measure[i];
  }
  if (energy <= 0.0)
    return ent <= 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  return 0.5 * m * std::log(4.0 / gamma * energy) - ent;
}

struct IsoperimetryReport {
  double kappa = 1.0;
  std::vector<double> t;
  std::vector<double> entropy_gap;
  std::vector<double> product;
  std::vector<double> lsi_slack;  // Stam slack of sqrt(u) at each sample
  double gamma = 0.0;             // 2 pi e m kappa^{2/m}, used by the checks
  double gamma_alt = 0.0;         // 4 pi e m kappa^{2/m}
};

}  // namespace eplab
