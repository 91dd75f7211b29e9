#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "eplab/error.hpp"
#include "eplab/functionals.hpp"
#include "eplab/geometry.hpp"
#include "eplab/heatflow.hpp"
#include "eplab/manifold.hpp"

namespace eplab {

enum class RicciBackend { conformal_torus, round_sphere_radial };

/// Metric at one forward time: conformal factor (torus) or scale (sphere).
struct MetricSample {
  double t = 0.0;
  Field w;
  double c = 1.0;
};

/// Forward metric trajectory, replayed backward by the conjugate heat flow.
struct MetricHistory {
  std::vector<MetricSample> samples;

  const MetricSample* find(double t, double tol) const {
    for (const auto& s : samples)
      if (std::abs(s.t - t) <= tol) return &s;
    return nullptr;
  }
};

/// g(t) = e^{2w} g0 on the torus, or c(t) g_{S^2} on the radial sphere grid.
/// u is a density against dv_{g(t)}; T is the horizon with tau = T - t.
struct RicciFlowState {
  RicciBackend backend = RicciBackend::conformal_torus;
  GridSpec grid;
  Field w;
  double c = 1.0;
  double t = 0.0;
  double T = 0.5;
  Field u;
  std::shared_ptr<const MetricHistory> history;

  double tau() const { return T - t; }
  MetricSample sample() const { return {t, w, c}; }
};

inline RicciFlowState torus_state(const GridSpec& spec, double amplitude, double horizon) {
  GridSpec s = spec;
  s.kind = GridKind::torus2d;
  s.conformal_amplitude = amplitude;
  validate(s);
  RicciFlowState st;
  st.backend = RicciBackend::conformal_torus;
  st.grid = s;
  st.w = build_manifold(s).conformal;
  st.T = horizon;
  return st;
}

/// Round sphere of scale c0 on a radial grid; the flow becomes extinct at T = c0 / 2.
inline RicciFlowState sphere_state(int resolution, double c0 = 1.0) {
  GridSpec s;
  s.kind = GridKind::radial_surface;
  s.resolution = resolution;
  s.extent = std::numbers::pi;
  s.profile.id = "sphere";
  validate(s);
  RicciFlowState st;
  st.backend = RicciBackend::round_sphere_radial;
  st.grid = s;
  st.c = c0;
  st.T = 0.5 * c0;
  return st;
}

/// Manifold for a metric sample; measure = Riemannian volume.
inline WeightedManifold metric_manifold(const RicciFlowState& st, const MetricSample& s) {
  if (st.backend == RicciBackend::conformal_torus) return build_conformal_torus(st.grid, s.w);
  return rescaled(build_manifold(st.grid), s.c, Rescaling::plain);
}

inline WeightedManifold metric_manifold(const RicciFlowState& st) { return metric_manifold(st, st.sample()); }

/// Scalar curvature R = 2K: -2 e^{-2w} Delta_0 w on the torus, 2/c on the sphere.
inline Field scalar_curvature(const RicciFlowState& st, const WeightedManifold& M) {
  if (st.backend == RicciBackend::round_sphere_radial) return Field(M.size(), 2.0 / st.c);
  Field R = conformal_gauss_curvature(M);
  for (auto& v : R) v *= 2.0;
  return R;
}

inline double cfl_limit(const RicciFlowState& st) {
  const double h = std::min(st.grid.extent / st.grid.resolution, st.grid.ly() / st.grid.ny());
  const double wmin = *std::min_element(st.w.begin(), st.w.end());
  return 0.2 * h * h * std::exp(2.0 * wmin);
}

/// One forward Ricci flow step. Torus: explicit Euler for dw/dt = e^{-2w} Delta_0 w
/// under the CFL guard dt <= 0.2 h^2 min e^{2w}. Sphere: c -= 2 dt.
inline RicciFlowState ricci_step(const RicciFlowState& st, double dt) {
  if (!(dt > 0.0)) throw Error(Errc::invalid_spec, "dt must be positive");
  RicciFlowState out = st;
  out.t = st.t + dt;
  if (st.backend == RicciBackend::round_sphere_radial) {
    if (!(out.t < st.T)) throw Error(Errc::extinction_reached, "step reaches the extinction time");
    out.c = st.c - 2.0 * dt;
    return out;
  }
  if (dt > cfl_limit(st) * (1.0 + 1e-12)) throw Error(Errc::cfl_violation, "dt exceeds 0.2 h^2 min e^{2w}");
  const int Nx = st.grid.resolution, Ny = st.grid.ny();
  const double hx = st.grid.extent / Nx, hy = st.grid.ly() / Ny;
  for (int j = 0; j < Ny; ++j) {
    const int jp = (j + 1) % Ny, jm = (j + Ny - 1) % Ny;
    for (int i = 0; i < Nx; ++i) {
      const int ip = (i + 1) % Nx, im = (i + Nx - 1) % Nx;
      const int k = j * Nx + i;
      const double lap = (st.w[j * Nx + ip] - 2.0 * st.w[k] + st.w[j * Nx + im]) / (hx * hx) +
                         (st.w[jp * Nx + i] - 2.0 * st.w[k] + st.w[jm * Nx + i]) / (hy * hy);
      out.w[k] = st.w[k] + dt * std::exp(-2.0 * st.w[k]) * lap;
    }
  }
  return out;
}

/// Advances by dt with as many equal CFL-admissible substeps as needed.
inline RicciFlowState ricci_advance(const RicciFlowState& st, double dt) {
  if (st.backend == RicciBackend::round_sphere_radial) return ricci_step(st, dt);
  const int sub = std::max(1, static_cast<int>(std::ceil(dt / cfl_limit(st))));
  RicciFlowState cur = st;
  const double h = dt / sub;
  for (int s = 0; s < sub; ++s) cur = ricci_step(cur, std::min(h, cfl_limit(cur)));
  cur.t = st.t + dt;
  return cur;
}

/// Runs the forward flow to t_end in steps of dt and stores every step.
inline RicciFlowState flow_forward(const RicciFlowState& st0, double t_end, double dt) {
  auto hist = std::make_shared<MetricHistory>();
  RicciFlowState st = st0;
  hist->samples.push_back(st.sample());
  const auto steps = static_cast<std::size_t>(std::llround((t_end - st0.t) / dt));
  for (std::size_t k = 1; k <= steps; ++k) {
    st = ricci_advance(st, dt);
    st.t = st0.t + static_cast<double>(k) * dt;
    hist->samples.push_back(st.sample());
  }
  st.history = hist;
  return st;
}

/// Backward step t -> t - dtau of du/dtau = Delta u - R u on the stored metric.
/// With U = u v (mass per cell), dU/dtau = -S u, discretised implicitly as
/// (V(t - dtau) + dtau S) u_new = V(t) u_old, which conserves sum U exactly.
inline RicciFlowState conjugate_heat_step(const RicciFlowState& st, double dtau) {
  if (!(dtau > 0.0)) throw Error(Errc::invalid_spec, "dtau must be positive");
  if (!st.history) throw Error(Errc::history_missing, "no stored metric trajectory");
  const double tol = 1e-9 * std::max(1.0, std::abs(st.t));
  const MetricSample* now = st.history->find(st.t, tol);
  const MetricSample* prev = st.history->find(st.t - dtau, tol);
  if (!now || !prev) throw Error(Errc::history_missing, "metric history has no sample at the requested time");
  const WeightedManifold M1 = metric_manifold(st, *now);
  const WeightedManifold M0 = metric_manifold(st, *prev);
  const SparseMatrix S = stiffness_matrix(M0);
  SparseMatrix A = dtau * S;
  const std::size_t n = M0.size();
  for (std::size_t i = 0; i < n; ++i) A.coeffRef(static_cast<int>(i), static_cast<int>(i)) += M0.volume[i];
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) rhs[static_cast<Eigen::Index>(i)] = M1.volume[i] * st.u[i];
  Eigen::SimplicialLDLT<SparseMatrix> solver(A);
  if (solver.info() != Eigen::Success) throw Error(Errc::solve_failure, "factorisation failed");
  Eigen::VectorXd x = solver.solve(rhs);
  if (solver.info() != Eigen::Success) throw Error(Errc::solve_failure, "conjugate heat solve failed");

  RicciFlowState out = st;
  out.t = prev->t;
  out.w = prev->w;
  out.c = prev->c;
  out.u.assign(x.data(), x.data() + n);
  double vmax = 0.0;
  for (double v : out.u) vmax = std::max(vmax, v);
  for (auto& v : out.u) {
    if (v < -1e-12 * vmax) throw Error(Errc::positivity_loss, "negative conjugate density");
    if (v <= 0.0) v = std::numeric_limits<double>::min();
  }
  return out;
}

inline double conjugate_mass(const RicciFlowState& st) {
  const auto M = metric_manifold(st);
  double s = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) s += st.u[i] * M.volume[i];
  return s;
}

/// H = -sum u log u v.
inline double perelman_entropy(const RicciFlowState& st, const WeightedManifold& M) {
  double h = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i)
    if (st.u[i] > 0.0) h -= st.u[i] * std::log(std::max(st.u[i], kDensityFloor)) * M.volume[i];
  return h;
}

inline double perelman_f(const RicciFlowState& st, const WeightedManifold& M) {
  for (double v : st.u)
    if (!(v > 0.0)) throw Error(Errc::zero_density, "F needs a positive density");
  const Field R = scalar_curvature(st, M);
  const Field lu = log_density(st.u);
  const Field g = carre_du_champ(M, lu, lu);
  double s = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) s += (R[i] + g[i]) * st.u[i] * M.volume[i];
  return s;
}

inline double perelman_f(const RicciFlowState& st) { return perelman_f(st, metric_manifold(st)); }

/// W = tau F + H - (n/2) log(4 pi tau) - n, i.e. sum (tau (R + |grad f|^2) + f - n) u v.
inline double perelman_w(const RicciFlowState& st, const WeightedManifold& M) {
  const double tau = st.tau();
  if (!(tau > 0.0)) throw Error(Errc::non_positive_tau, "W needs tau > 0");
  const double n = 2.0;
  return tau * perelman_f(st, M) + perelman_entropy(st, M) - 0.5 * n * std::log(4.0 * std::numbers::pi * tau) - n;
}

inline double perelman_w(const RicciFlowState& st) { return perelman_w(st, metric_manifold(st)); }

/// L^2(u dv) norm of Ric + Hess f - g / 2 tau.
inline double soliton_residual(const RicciFlowState& st, const WeightedManifold& M) {
  const double tau = st.tau();
  if (!(tau > 0.0)) throw Error(Errc::non_positive_tau, "soliton residual needs tau > 0");
  const Field lu = log_density(st.u);
  const auto H = hessian(M, lu);  // Hess f = -Hess log u
  const Field R = scalar_curvature(st, M);
  double s = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    const double d = 0.5 * R[i] - 0.5 / tau;
    const Sym2 T{d - H[i].aa, -H[i].ab, d - H[i].bb};
    s += T.norm2() * st.u[i] * M.volume[i];
  }
  return std::sqrt(s);
}

inline double soliton_residual(const RicciFlowState& st) { return soliton_residual(st, metric_manifold(st)); }

/// Entropy quantities along the conjugate flow, ordered by increasing tau.
struct PerelmanTrace {
  std::vector<double> tau, t, H, F, W, N, soliton;
  std::vector<double> dH_dtau, dN_dtau, d2N_dtau2, dW_dt;

  std::size_t size() const { return tau.size(); }
  bool interior(std::size_t k) const { return k > 0 && k + 1 < size(); }
};

inline void finish_perelman_trace(PerelmanTrace& p) {
  const std::size_t n = p.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  p.N.resize(n);
  for (std::size_t k = 0; k < n; ++k) p.N[k] = std::exp(p.H[k]);  // exp(2H/n), n = 2
  for (auto* v : {&p.dH_dtau, &p.dN_dtau, &p.d2N_dtau2, &p.dW_dt}) v->assign(n, nan);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    p.dH_dtau[k] = detail::d1(p.tau, p.H, k);
    p.dN_dtau[k] = detail::d1(p.tau, p.N, k);
    p.d2N_dtau2[k] = detail::d2(p.tau, p.N, k);
    p.dW_dt[k] = -detail::d1(p.tau, p.W, k);
  }
}

/// d2N/dtau2 - (2N/n) [ (2/n)(F - n/2tau)^2 - (1/tau) dW/dt ].
inline double nfw_residual(const PerelmanTrace& p, std::size_t k) {
  if (!p.interior(k)) throw Error(Errc::boundary_index, "derivatives need an interior index");
  const double n = 2.0, tau = p.tau[k], N = p.N[k];
  const double gap = p.F[k] - n / (2.0 * tau);
  return p.d2N_dtau2[k] - (2.0 * N / n) * ((2.0 / n) * gap * gap - p.dW_dt[k] / tau);
}

}  // namespace eplab
