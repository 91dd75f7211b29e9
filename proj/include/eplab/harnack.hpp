#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "eplab/error.hpp"
#include "eplab/functionals.hpp"
#include "eplab/manifold.hpp"

namespace eplab {

struct HarnackReport {
  double t = 0.0;
  double alpha = 1.0;
  double margin = std::numeric_limits<double>::infinity();  // min over vertices of (bound - lhs)
  std::size_t vertex = 0;
  double fisher_bound = 0.0;  // integrated bound on I(t)
  double fisher = 0.0;        // I(t) for comparison
  double integrated_lhs = 0.0;  // sum (|grad u|^2/u^2 - alpha u_t/u) u mu
  // min over vertices of margin / (bound + |grad log u|^2 + alpha |u_t/u|), the
  // margin measured against the size of the terms that cancel in it
  double relative_margin = std::numeric_limits<double>::infinity();
};

/// Vertices whose density is numerically resolved; far tails that sit at the
/// floating-point floor carry no information about the inequality.
inline bool resolved_vertex(std::span<const double> u, std::size_t i, double umax) {
  return u[i] > 1e-200 && u[i] > 1e-250 * umax;
}

namespace detail {

// Pointwise |grad log u|^2 - a * u_t / u, with u_t / u either supplied or
// evaluated as L log u + Gamma(log u).
inline HarnackReport harnack_scan(const WeightedManifold& M, std::span<const double> u,
                                  std::span<const double> du_dt, double t, double a, double bound) {
  const Field lu = log_density(u);
  const Field g = carre_du_champ(M, lu, lu);
  Field ratio(u.size());
  if (du_dt.empty()) {
    const Field l = apply_laplacian(M, lu);
    for (std::size_t i = 0; i < u.size(); ++i) ratio[i] = l[i] + g[i];
  } else {
    for (std::size_t i = 0; i < u.size(); ++i) ratio[i] = du_dt[i] / std::max(u[i], kDensityFloor);
  }
  const double umax = *std::max_element(u.begin(), u.end());
  HarnackReport r;
  r.t = t;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double lhs = g[i] - a * ratio[i];
    r.integrated_lhs += lhs * u[i] * M.measure[i];
    r.fisher += g[i] * u[i] * M.measure[i];
    if (!resolved_vertex(u, i, umax)) continue;
    const double margin = bound - lhs;
    r.relative_margin = std::min(r.relative_margin, margin / (bound + g[i] + std::abs(a * ratio[i])));
    if (margin < r.margin) {
      r.margin = margin;
      r.vertex = i;
    }
  }
  return r;
}

}  // namespace detail

/// Li-Yau margin  m a^2/2t + m a^2 K-/(2(a-1)) - (|grad u|^2/u^2 - a u_t/u).
/// An empty `du_dt` means u_t = Lu evaluated through log u.
inline HarnackReport li_yau_margin(const WeightedManifold& M, std::span<const double> u,
                                   std::span<const double> du_dt, double t, double alpha, double K_minus,
                                   double m) {
  if (K_minus < 0.0) throw Error(Errc::alpha_out_of_range, "K- must be nonnegative");
  if (K_minus > 0.0 ? !(alpha > 1.0) : !(alpha >= 1.0))
    throw Error(Errc::alpha_out_of_range, "alpha must exceed 1 (or equal 1 when K- = 0)");
  double bound = m * alpha * alpha / (2.0 * t);
  if (K_minus > 0.0) bound += m * alpha * alpha * K_minus / (2.0 * (alpha - 1.0));
  HarnackReport r = detail::harnack_scan(M, u, du_dt, t, alpha, bound);
  r.alpha = alpha;
  // Integrating against u mu kills the u_t term (mass conservation), so I <= bound.
  r.fisher_bound = bound;
  return r;
}

/// Hamilton margin  (m/2t) e^{4 K- t} - (|grad u|^2/u^2 - e^{2 K- t} u_t/u).
inline HarnackReport hamilton_margin(const WeightedManifold& M, std::span<const double> u,
                                     std::span<const double> du_dt, double t, double K_minus, double m) {
  const double a = std::exp(2.0 * K_minus * t);
  const double bound = m / (2.0 * t) * std::exp(4.0 * K_minus * t);
  HarnackReport r = detail::harnack_scan(M, u, du_dt, t, a, bound);
  r.alpha = a;
  r.fisher_bound = bound;
  return r;
}

/// max over t_k in [t0, 4 t0] of t_k I_k - m/2.
inline double initial_slope_check(const EntropyTrace& tr, double m) {
  if (tr.size() < 2) throw Error(Errc::trace_too_short, "trace needs at least two samples");
  const double t0 = tr.t.front();
  if (tr.t.back() < 4.0 * t0 * (1.0 - 1e-12)) throw Error(Errc::trace_too_short, "trace ends before 4 t0");
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tr.size() && tr.t[k] <= 4.0 * t0 * (1.0 + 1e-12); ++k)
    worst = std::max(worst, tr.t[k] * tr.I[k] - 0.5 * m);
  return worst;
}

}  // namespace eplab
