#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "eplab/error.hpp"
#include "eplab/geometry.hpp"
#include "eplab/heatflow.hpp"
#include "eplab/manifold.hpp"

namespace eplab {

/// Densities below this value are treated as this value inside logarithms.
inline constexpr double kDensityFloor = 1e-300;

inline Field log_density(std::span<const double> u) {
  Field out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::log(std::max(u[i], kDensityFloor));
  return out;
}

inline void require_normalized(const WeightedManifold& M, std::span<const double> u, double tol = 1e-8) {
  const double m = integrate(M, u);
  if (std::abs(m - 1.0) > tol) throw Error(Errc::non_normalized, "density does not have unit mass");
}

/// Shannon entropy -sum u log u mu with 0 log 0 = 0.
inline double entropy(const WeightedManifold& M, std::span<const double> u) {
  require_normalized(M, u);
  double h = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] <= 0.0) continue;
    h -= u[i] * std::log(std::max(u[i], kDensityFloor)) * M.measure[i];
  }
  return h;
}

/// Fisher information sum Gamma(log u) u mu.
inline double fisher_information(const WeightedManifold& M, std::span<const double> u) {
  for (double v : u)
    if (!(v > 0.0)) throw Error(Errc::zero_density, "Fisher information needs a positive density");
  const Field lu = log_density(u);
  const Field g = carre_du_champ(M, lu, lu);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += g[i] * u[i] * M.measure[i];
  return s;
}

inline double entropy_power(double H, double m) { return std::exp(2.0 * H / m); }

/// f = -log u - (m/2) log(4 pi t), so that u = (4 pi t)^{-m/2} e^{-f}.
struct PotentialField {
  Field f;
  double t = 0.0;
  double m = 1.0;

  Field density() const {
    Field u(f.size());
    const double c = std::pow(4.0 * std::numbers::pi * t, -0.5 * m);
    for (std::size_t i = 0; i < f.size(); ++i) u[i] = c * std::exp(-f[i]);
    return u;
  }
};

inline PotentialField potential_field(std::span<const double> u, double t, double m) {
  PotentialField p{log_density(u), t, m};
  const double c = 0.5 * m * std::log(4.0 * std::numbers::pi * t);
  for (auto& v : p.f) v = -v - c;
  return p;
}

/// Scalar functionals of a heat-flow trajectory sampled at every time step,
/// with centred finite differences. Index k has derivatives iff 0 < k < size-1.
///
/// N' and N'' (columns dN_chain, d2N_chain) come from the chain rule with
/// H' = I and H'' = dI/dt; dN and d2N are direct differences of N.
struct EntropyTrace {
  double m = 1.0;
  double K = 0.0;
  std::vector<double> t, H, I, N, Hm, Wm, WmK;
  std::vector<double> dH, dI, dN, d2N, dN_chain, d2N_chain, dWm, dWmK;
  std::vector<double> fd_noise;  // |D_h H - D_2h H|, Richardson estimate of the difference error

  std::size_t size() const { return t.size(); }
  bool interior(std::size_t k) const { return k > 0 && k + 1 < size(); }
  void require_interior(std::size_t k) const {
    if (!interior(k)) throw Error(Errc::boundary_index, "derivatives need an interior index");
  }
};

namespace detail {
inline double d1(const std::vector<double>& t, const std::vector<double>& f, std::size_t k) {
  return (f[k + 1] - f[k - 1]) / (t[k + 1] - t[k - 1]);
}
inline double d2(const std::vector<double>& t, const std::vector<double>& f, std::size_t k) {
  const double hl = t[k] - t[k - 1], hr = t[k + 1] - t[k];
  return 2.0 * (hl * f[k + 1] - (hl + hr) * f[k] + hr * f[k - 1]) / (hl * hr * (hl + hr));
}
}  // namespace detail

/// Assemble the trace from per-step (t, H, I).
inline EntropyTrace build_entropy_trace(std::vector<double> t, std::vector<double> H, std::vector<double> I,
                                        double m, double K) {
  EntropyTrace tr;
  tr.m = m;
  tr.K = K;
  tr.t = std::move(t);
  tr.H = std::move(H);
  tr.I = std::move(I);
  const std::size_t n = tr.t.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  tr.N.resize(n);
  tr.Hm.resize(n);
  tr.Wm.resize(n);
  tr.WmK.resize(n);
  const double four_pi = 4.0 * std::numbers::pi;
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = tr.t[k];
    tr.N[k] = entropy_power(tr.H[k], m);
    tr.Hm[k] = tr.H[k] - 0.5 * m * std::log(four_pi * std::numbers::e * tk);
    tr.Wm[k] = tr.Hm[k] + tk * tr.I[k] - 0.5 * m;
    const double q = 1.0 - 0.5 * K * tk;
    tr.WmK[k] = tk * tr.I[k] + tr.H[k] - 0.5 * m * std::log(four_pi * tk) - m * q * q;
  }
  for (auto* v : {&tr.dH, &tr.dI, &tr.dN, &tr.d2N, &tr.dN_chain, &tr.d2N_chain, &tr.dWm, &tr.dWmK, &tr.fd_noise})
    v->assign(n, nan);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    tr.dH[k] = detail::d1(tr.t, tr.H, k);
    tr.dI[k] = detail::d1(tr.t, tr.I, k);
    tr.dN[k] = detail::d1(tr.t, tr.N, k);
    tr.d2N[k] = detail::d2(tr.t, tr.N, k);
    tr.dN_chain[k] = (2.0 / m) * tr.I[k] * tr.N[k];
    tr.d2N_chain[k] = (2.0 * tr.N[k] / m) * (tr.dI[k] + (2.0 / m) * tr.I[k] * tr.I[k]);
    tr.dWm[k] = detail::d1(tr.t, tr.Wm, k);
    tr.dWmK[k] = detail::d1(tr.t, tr.WmK, k);
    if (k >= 2 && k + 2 < n)
      tr.fd_noise[k] = std::abs(tr.dH[k] - (tr.H[k + 2] - tr.H[k - 2]) / (tr.t[k + 2] - tr.t[k - 2]));
    else
      tr.fd_noise[k] = 0.0;
  }
  return tr;
}

/// W_m = H - (m/2) log(4 pi e t) + t I - m/2 (I-form of d/dt (t H_m)).
inline double w_entropy(const EntropyTrace& tr, std::size_t k) {
  tr.require_interior(k);
  return tr.Wm[k];
}

/// Integral form sum (t |grad f|^2 + f - m) u mu.
inline double w_entropy_integral(const WeightedManifold& M, std::span<const double> u, double t, double m) {
  const PotentialField p = potential_field(u, t, m);
  const Field lu = log_density(u);
  const Field g = carre_du_champ(M, lu, lu);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (t * g[i] + p.f[i] - m) * u[i] * M.measure[i];
  return s;
}

/// H'' + 2 H'^2 / m + 2 K H' with H' = I and H'' = dI/dt.
inline double edi_residual(const EntropyTrace& tr, double K, double m, std::size_t k) {
  tr.require_interior(k);
  const double i = tr.I[k];
  return tr.dI[k] + 2.0 * i * i / m + 2.0 * K * i;
}

/// N'' + 2 K N' from the chain-rule derivatives.
inline double epci_residual(const EntropyTrace& tr, double K, std::size_t k) {
  tr.require_interior(k);
  return tr.d2N_chain[k] + 2.0 * K * tr.dN_chain[k];
}

/// d2N - (2N/m) [ (2/m)(I - m/2t)^2 + (1/t) dW_m/dt ] with d2N and dW_m/dt from differences.
inline double niw_residual(const EntropyTrace& tr, std::size_t k) {
  tr.require_interior(k);
  const double m = tr.m, t = tr.t[k], N = tr.N[k];
  const double gap = tr.I[k] - m / (2.0 * t);
  return tr.d2N[k] - (2.0 * N / m) * ((2.0 / m) * gap * gap + tr.dWm[k] / t);
}

/// d2N + 2K dN - (2N/m) [ (2/m)(I - m(1 - K t)/2t)^2 + (1/t) dW_{m,K}/dt ] where
/// W_{m,K} = sum (t |grad f|^2 + f - m (1 - K t / 2)^2) u mu.
inline double niw_residual_K(const EntropyTrace& tr, double K, double m, std::size_t k) {
  tr.require_interior(k);
  if (K != tr.K) throw Error(Errc::invalid_spec, "trace was assembled with a different K");
  const double t = tr.t[k], N = tr.N[k];
  const double gap = tr.I[k] - m * (1.0 - K * t) / (2.0 * t);
  return tr.d2N[k] + 2.0 * K * tr.dN[k] - (2.0 * N / m) * ((2.0 / m) * gap * gap + tr.dWmK[k] / t);
}

/// sum (|Hess log u|^2 + Ric(L)(grad log u, grad log u)) u mu; equals -H''/2.
inline double gamma2_integral(const WeightedManifold& M, std::span<const double> u) {
  const Field lu = log_density(u);
  const auto H = hessian(M, lu);
  const auto g = gradient(M, lu);
  const auto curv = curvature(M);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    s += (H[i].norm2() + curv.ricci_L[i].apply(g[i])) * u[i] * M.measure[i];
  return s;
}

/// The four nonpositive integrals whose sum is (m/2N)(N'' + 2 K N').
struct NN1Terms {
  double curvature = 0.0;  // -2 int (dg/2dt + Ric_{m,n}(L) - K g)(grad f, grad f) u
  double variance = 0.0;   // -(2/m) int (Lf - int Lf u)^2 u
  double drift = 0.0;      // -2 (1/n - 1/m) int (Delta f + n/(m-n) grad phi.grad f)^2 u
  double traceless = 0.0;  // -2 int |Hess f - (Delta f / n) g|^2 u
  double target = 0.0;     // (m/2N)(N'' + 2 K N') from the trace
  double min_curvature_margin = 0.0;  // min over vertices of the smallest eigenvalue of the curvature form

  double sum() const { return curvature + variance + drift + traceless; }
};

/// `metric_rate` is c'/c for a conformal schedule g(t) = c(t) g0 (zero when static).
inline NN1Terms nn1_decomposition(const WeightedManifold& M, std::span<const double> u, const EntropyTrace& tr,
                                  double K, double m, std::size_t k, double metric_rate = 0.0) {
  tr.require_interior(k);
  const double n = M.n;
  const Field lu = log_density(u);
  const auto Hl = hessian(M, lu);
  const auto gl = gradient(M, lu);
  const auto curv = curvature(M);
  const auto gp = weight_gradient(M);
  const std::size_t nv = M.size();

  NN1Terms out;
  out.min_curvature_margin = std::numeric_limits<double>::infinity();
  Field Lf(nv), Df(nv), bf(nv);
  double mean_Lf = 0.0;
  for (std::size_t i = 0; i < nv; ++i) {
    // f = -log u + const
    const Sym2 hf{-Hl[i].aa, -Hl[i].ab, -Hl[i].bb};
    const Vec2 gf{-gl[i].a, -gl[i].b};
    Df[i] = hf.trace();
    bf[i] = dot(gp[i], gf);
    Lf[i] = Df[i] - bf[i];
    mean_Lf += Lf[i] * u[i] * M.measure[i];

    Sym2 form = curv.ricci_L[i];
    form.aa += 0.5 * metric_rate - K;
    form.bb += n > 1 ? 0.5 * metric_rate - K : 0.0;
    double q = form.apply(gf);
    if (m > n) {
      const double p = bf[i];
      q -= p * p / (m - n);
    }
    out.curvature += -2.0 * q * u[i] * M.measure[i];

    // Smallest eigenvalue of the curvature form along the radial / axis direction
    // (the Ric_{m,n} correction acts along grad phi).
    const double gp2 = gp[i].a * gp[i].a + gp[i].b * gp[i].b;
    const double corr = m > n ? gp2 / (m - n) : 0.0;
    double lam = n > 1 ? 0.5 * (form.aa + form.bb) - std::hypot(0.5 * (form.aa - form.bb), form.ab) : form.aa;
    lam -= corr;
    out.min_curvature_margin = std::min(out.min_curvature_margin, lam);

    if (n > 1) {
      const double d = 0.5 * (hf.aa - hf.bb);
      out.traceless += -2.0 * (2.0 * d * d + 2.0 * hf.ab * hf.ab) * u[i] * M.measure[i];
    }
  }
  for (std::size_t i = 0; i < nv; ++i) {
    const double v = Lf[i] - mean_Lf;
    out.variance += -(2.0 / m) * v * v * u[i] * M.measure[i];
    if (m > n) {
      const double a = Df[i] + (n / (m - n)) * bf[i];
      out.drift += -2.0 * (1.0 / n - 1.0 / m) * a * a * u[i] * M.measure[i];
    }
  }
  const double i = tr.I[k];
  out.target = tr.dI[k] + (2.0 / m) * i * i + 2.0 * K * i;
  return out;
}

}  // namespace eplab
