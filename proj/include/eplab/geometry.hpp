#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "eplab/catalog.hpp"
#include "eplab/manifold.hpp"

namespace eplab {

/// Tangent vector in the orthonormal frame of a vertex. 1D kinds use `a` only.
/// Radial surfaces use (radial, angular); torus2d uses e^{-w}(d/dx, d/dy).
struct Vec2 {
  double a = 0.0;
  double b = 0.0;
};

/// Symmetric 2-tensor in the orthonormal frame.
struct Sym2 {
  double aa = 0.0;
  double ab = 0.0;
  double bb = 0.0;

  double trace() const { return aa + bb; }
  double norm2() const { return aa * aa + 2.0 * ab * ab + bb * bb; }
  double apply(const Vec2& v) const { return aa * v.a * v.a + 2.0 * ab * v.a * v.b + bb * v.b * v.b; }
};

inline double dot(const Vec2& u, const Vec2& v) { return u.a * v.a + u.b * v.b; }

/// Per-vertex curvature data, closed form per grid kind.
struct CurvatureData {
  std::vector<Sym2> ricci;
  std::vector<Sym2> ricci_L;  // Ric + Hess(phi)
  Field scalar;               // R = tr Ric
};

namespace detail {

// First and second coordinate derivatives from central differences.
struct AxisDerivs {
  Field dx, dxx, dy, dyy, dxy;
};

inline AxisDerivs axis_derivatives(const WeightedManifold& M, std::span<const double> u) {
  AxisDerivs d;
  const std::size_t n = M.size();
  d.dx.resize(n);
  d.dxx.resize(n);
  if (M.spec.kind == GridKind::torus2d) {
    d.dy.resize(n);
    d.dyy.resize(n);
    d.dxy.resize(n);
    const int Nx = M.nx, Ny = M.ny;
    const double hx = M.hx, hy = M.hy;
    for (int j = 0; j < Ny; ++j) {
      const int jp = (j + 1) % Ny, jm = (j + Ny - 1) % Ny;
      for (int i = 0; i < Nx; ++i) {
        const int ip = (i + 1) % Nx, im = (i + Nx - 1) % Nx;
        const int k = j * Nx + i;
        const double c = u[k];
        const double e = u[j * Nx + ip], w = u[j * Nx + im];
        const double nn = u[jp * Nx + i], s = u[jm * Nx + i];
        d.dx[k] = (e - w) / (2.0 * hx);
        d.dy[k] = (nn - s) / (2.0 * hy);
        d.dxx[k] = (e - 2.0 * c + w) / (hx * hx);
        d.dyy[k] = (nn - 2.0 * c + s) / (hy * hy);
        d.dxy[k] = (u[jp * Nx + ip] - u[jm * Nx + ip] - u[jp * Nx + im] + u[jm * Nx + im]) / (4.0 * hx * hy);
      }
    }
    return d;
  }
  const int N = static_cast<int>(n);
  const bool periodic = M.spec.kind == GridKind::circle;
  const double h = M.hx;
  for (int i = 0; i < N; ++i) {
    double up, um;
    if (periodic) {
      up = u[(i + 1) % N];
      um = u[(i + N - 1) % N];
    } else {
      // Ghost reflection: zero flux at interval ends and regularity at poles.
      up = i + 1 < N ? u[i + 1] : u[i];
      um = i > 0 ? u[i - 1] : u[i];
    }
    d.dx[i] = (up - um) / (2.0 * h);
    d.dxx[i] = (up - 2.0 * u[i] + um) / (h * h);
  }
  return d;
}

inline void require_structured(const WeightedManifold& M) {
  if (!M.structured()) throw Error(Errc::hessian_unavailable, "no discrete Hessian on icosphere meshes");
}

}  // namespace detail

/// Gradient in the orthonormal frame (central differences).
inline std::vector<Vec2> gradient(const WeightedManifold& M, std::span<const double> u) {
  detail::require_structured(M);
  const auto d = detail::axis_derivatives(M, u);
  const double s = 1.0 / std::sqrt(M.metric_scale);
  std::vector<Vec2> g(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) {
    if (M.spec.kind == GridKind::torus2d) {
      const double f = s * std::exp(-M.conformal[i]);
      g[i] = {f * d.dx[i], f * d.dy[i]};
    } else {
      g[i] = {s * d.dx[i], 0.0};
    }
  }
  return g;
}

/// Riemannian Hessian in the orthonormal frame, with Christoffel corrections
/// for the conformal torus and the warped-product radial surface.
inline std::vector<Sym2> hessian(const WeightedManifold& M, std::span<const double> u) {
  detail::require_structured(M);
  const auto d = detail::axis_derivatives(M, u);
  const double inv_c = 1.0 / M.metric_scale;
  std::vector<Sym2> H(M.size());
  switch (M.spec.kind) {
    case GridKind::circle:
    case GridKind::interval:
      for (std::size_t i = 0; i < M.size(); ++i) H[i] = {inv_c * d.dxx[i], 0.0, 0.0};
      break;
    case GridKind::radial_surface:
      for (std::size_t i = 0; i < M.size(); ++i) {
        const double q = profile_log_derivative(M.spec.profile, M.x[i]);
        H[i] = {inv_c * d.dxx[i], 0.0, inv_c * q * d.dx[i]};
      }
      break;
    case GridKind::torus2d: {
      const auto w = detail::axis_derivatives(M, M.conformal);
      for (std::size_t i = 0; i < M.size(); ++i) {
        const double ux = d.dx[i], uy = d.dy[i], wx = w.dx[i], wy = w.dy[i];
        const double f = inv_c * std::exp(-2.0 * M.conformal[i]);
        H[i].aa = f * (d.dxx[i] - wx * ux + wy * uy);
        H[i].bb = f * (d.dyy[i] - wy * uy + wx * ux);
        H[i].ab = f * (d.dxy[i] - wy * ux - wx * uy);
      }
      break;
    }
    case GridKind::icosphere: break;
  }
  return H;
}

/// Gauss curvature of the conformal torus, -e^{-2w} Delta_0 w / c, using the
/// five-point Laplacian (the same stencil the Ricci flow integrates).
inline Field conformal_gauss_curvature(const WeightedManifold& M) {
  Field K(M.size(), 0.0);
  if (M.conformal.empty()) return K;
  const auto w = detail::axis_derivatives(M, M.conformal);
  for (std::size_t i = 0; i < M.size(); ++i)
    K[i] = -std::exp(-2.0 * M.conformal[i]) * (w.dxx[i] + w.dyy[i]) / M.metric_scale;
  return K;
}

/// Gradient and Hessian of the catalog potential (closed forms).
inline std::vector<Vec2> weight_gradient(const WeightedManifold& M) {
  std::vector<Vec2> g(M.size());
  if (!M.weighted()) return g;
  const double s = 1.0 / std::sqrt(M.metric_scale);
  for (std::size_t i = 0; i < M.size(); ++i) g[i] = {s * weight_jet(M.spec.weight, M.x[i], M.spec.extent).d1, 0.0};
  return g;
}

inline std::vector<Sym2> weight_hessian(const WeightedManifold& M) {
  std::vector<Sym2> H(M.size());
  if (!M.weighted()) return H;
  const double inv_c = 1.0 / M.metric_scale;
  for (std::size_t i = 0; i < M.size(); ++i) {
    const Jet j = weight_jet(M.spec.weight, M.x[i], M.spec.extent);
    if (M.spec.kind == GridKind::radial_surface)
      H[i] = {inv_c * j.d2, 0.0, inv_c * profile_log_derivative(M.spec.profile, M.x[i]) * j.d1};
    else
      H[i] = {inv_c * j.d2, 0.0, 0.0};
  }
  return H;
}

inline CurvatureData curvature(const WeightedManifold& M) {
  CurvatureData c;
  const std::size_t n = M.size();
  c.ricci.resize(n);
  c.scalar.resize(n);
  const double inv_c = 1.0 / M.metric_scale;
  Field gauss;
  if (M.spec.kind == GridKind::torus2d) gauss = conformal_gauss_curvature(M);
  for (std::size_t i = 0; i < n; ++i) {
    double k = 0.0;
    switch (M.spec.kind) {
      case GridKind::circle:
      case GridKind::interval: k = 0.0; break;
      case GridKind::radial_surface: k = inv_c * profile_gauss_curvature(M.spec.profile); break;
      case GridKind::torus2d: k = gauss[i]; break;
      case GridKind::icosphere: k = inv_c; break;
    }
    c.ricci[i] = M.n == 1 ? Sym2{} : Sym2{k, 0.0, k};
    c.scalar[i] = M.n == 1 ? 0.0 : 2.0 * k;
  }
  const auto hp = weight_hessian(M);
  c.ricci_L.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    c.ricci_L[i] = {c.ricci[i].aa + hp[i].aa, c.ricci[i].ab + hp[i].ab, c.ricci[i].bb + hp[i].bb};
  return c;
}

/// Ric_{m,n}(L)(X, X) = Ric(X,X) + Hess(phi)(X,X) - <grad phi, X>^2 / (m - n).
inline Field ricci_mn_form(const WeightedManifold& M, std::span<const Vec2> X) {
  const bool equal = M.m == static_cast<double>(M.n);
  if (equal && M.weighted())
    throw Error(Errc::dimension_mismatch, "m = n with a non-constant potential");
  const auto curv = curvature(M);
  const auto gp = weight_gradient(M);
  Field out(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) {
    double v = curv.ricci_L[i].apply(X[i]);
    if (!equal) {
      const double p = dot(gp[i], X[i]);
      v -= p * p / (M.m - M.n);
    }
    out[i] = v;
  }
  return out;
}

/// Vertices away from reflecting ends and poles, where one-sided stencils do
/// not pollute second-order quantities.
inline std::vector<std::size_t> interior_vertices(const WeightedManifold& M, double margin_fraction = 0.1) {
  std::vector<std::size_t> idx;
  const std::size_t n = M.size();
  if (M.spec.kind == GridKind::interval || M.spec.kind == GridKind::radial_surface) {
    const double margin = std::max(margin_fraction * M.spec.extent, 2.5 * M.hx);
    const double lo = M.spec.kind == GridKind::interval ? -0.5 * M.spec.extent : 0.0;
    const double hi = lo + M.spec.extent;
    for (std::size_t i = 0; i < n; ++i)
      if (M.x[i] - lo > margin && hi - M.x[i] > margin) idx.push_back(i);
    return idx;
  }
  for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  return idx;
}

/// max |L Gamma(u) - 2 Gamma(u, Lu) - 2 |Hess u|^2 - 2 Ric(L)(grad u, grad u)|
/// over interior vertices.
inline double bochner_residual(const WeightedManifold& M, std::span<const double> u) {
  detail::require_structured(M);
  const Field gu = carre_du_champ(M, u, u);
  const Field lu = apply_laplacian(M, u);
  const Field lgu = apply_laplacian(M, gu);
  const Field gul = carre_du_champ(M, u, lu);
  const auto H = hessian(M, u);
  const auto g = gradient(M, u);
  const auto curv = curvature(M);
  double worst = 0.0;
  for (std::size_t i : interior_vertices(M)) {
    const double r = lgu[i] - 2.0 * gul[i] - 2.0 * H[i].norm2() - 2.0 * curv.ricci_L[i].apply(g[i]);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace eplab
