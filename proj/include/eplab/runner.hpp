#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "eplab/config.hpp"
#include "eplab/error.hpp"
#include "eplab/functionals.hpp"
#include "eplab/geometry.hpp"
#include "eplab/harnack.hpp"
#include "eplab/heatflow.hpp"
#include "eplab/isoperimetry.hpp"
#include "eplab/manifold.hpp"
#include "eplab/ricciflow.hpp"
#include "eplab/tolerance.hpp"

namespace eplab {

inline constexpr const char* kRunFormat = "eplab-run/1";
inline constexpr const char* kStudyFormat = "eplab-study/1";
inline constexpr double kMinOrder = 0.8;
// Residuals below this fraction of their natural scale are at roundoff and count as converged.
inline constexpr double kRoundoffFloor = 1e-9;

/// One pass/fail comparison inside a check: `value <= limit` or `value >= limit`,
/// reported at the sample where it is tightest.
struct Condition {
  std::string what;
  std::string relation;  // "<=", ">=" or ">"
  double value = 0.0;
  double limit = 0.0;
  double t = std::numeric_limits<double>::quiet_NaN();
  bool passed = true;
  double excess = -std::numeric_limits<double>::infinity();
  bool seen = false;

  static Condition le(std::string w) { return {std::move(w), "<="}; }
  static Condition ge(std::string w) { return {std::move(w), ">="}; }
  static Condition gt(std::string w) { return {std::move(w), ">"}; }

  void sample(double v, double lim, double at = std::numeric_limits<double>::quiet_NaN()) {
    double ex = relation == "<=" ? v - lim : lim - v;
    bool ok = relation == ">" ? v > lim : ex <= 0.0;
    if (!std::isfinite(v)) {
      ok = false;
      ex = std::numeric_limits<double>::infinity();
    }
    if (!seen || ex > excess || (!ok && passed)) {
      value = v;
      limit = lim;
      t = at;
      excess = ex;
    }
    seen = true;
    passed = passed && ok;
  }
};

struct CheckResult {
  std::string name;
  std::vector<Condition> conditions;
  std::map<std::string, double> values;  // informational numbers

  bool passed() const {
    for (const auto& c : conditions)
      if (!c.passed) return false;
    return true;
  }
};

struct RunReport {
  ExperimentConfig config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<CheckResult> checks;
  std::map<std::string, double> metrics;        // residual sizes used by refinement studies
  std::map<std::string, double> metric_scales;  // natural magnitude of the terms in each residual

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed()) return false;
    return true;
  }
  const CheckResult* check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline const std::vector<std::string>& heat_columns() {
  static const std::vector<std::string> c = {"t",   "H",       "I",        "N",       "dN",
                                             "d2N", "Hm",      "Wm",       "dWm",     "edi_res",
                                             "epci_res", "niw_res", "liyau_margin", "hamilton_margin", "Q"};
  return c;
}

inline std::vector<std::string> ricci_columns() {
  auto c = heat_columns();
  for (const char* s : {"tau", "F", "W", "d2N_dtau2", "soliton_res"}) c.push_back(s);
  return c;
}

/// Smooth test field for Bochner residuals, compatible with reflecting ends and poles.
inline Field bochner_test_field(const WeightedManifold& M) {
  Field u(M.size());
  const double L = M.spec.extent;
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < M.size(); ++i) {
    const double x = M.x[i];
    switch (M.spec.kind) {
      case GridKind::circle: u[i] = std::sin(2.0 * pi * x / L) + 0.5 * std::cos(4.0 * pi * x / L); break;
      case GridKind::interval: u[i] = std::cos(2.0 * pi * x / L) + 0.3 * std::sin(pi * x / L); break;
      case GridKind::torus2d: {
        const double a = 2.0 * pi * x / L, b = 2.0 * pi * M.y[i] / M.spec.ly();
        u[i] = std::sin(a) + std::cos(b) + 0.5 * std::sin(a + b);
        break;
      }
      case GridKind::radial_surface: u[i] = std::cos(pi * x / L); break;
      case GridKind::icosphere: u[i] = M.z[i]; break;
    }
  }
  return u;
}

namespace detail {

inline double tolerance_constant(const ExperimentConfig& c, const std::string& name) {
  const CheckSpec* s = c.check(name);
  return s && s->tolerance ? *s->tolerance : kToleranceConstant;
}

inline double fixed_tolerance(const ExperimentConfig& c, const std::string& name, double dflt) {
  const CheckSpec* s = c.check(name);
  return s && s->tolerance ? *s->tolerance : dflt;
}

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline double kappa_or_one(const GridSpec& g) {
  try {
    return avr_kappa(g);
  } catch (const Error&) {
    return 1.0;
  }
}

// Bochner residual at the configured resolution and at half of it.
inline std::pair<double, double> bochner_pair(const GridSpec& g) {
  const WeightedManifold M = build_manifold(g);
  GridSpec coarse = g;
  coarse.resolution = std::max(8, g.resolution / 2);
  if (g.resolution_y > 0) coarse.resolution_y = std::max(8, g.resolution_y / 2);
  const WeightedManifold Mc = build_manifold(coarse);
  return {bochner_residual(M, bochner_test_field(M)), bochner_residual(Mc, bochner_test_field(Mc))};
}

struct HeatData {
  WeightedManifold M0;
  EntropyTrace trace;
  std::vector<DensityField> snaps;
  std::vector<std::size_t> snap_step;
  double max_mass_error = 0.0;
  double min_density = std::numeric_limits<double>::infinity();
  double max_measure_drift = 0.0;
  double max_mass_correction = 0.0;
  double h = 0.0;
};

inline std::vector<double> output_times(double t0, double t_end, int count) {
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = t0 + (t_end - t0) * i / (count - 1);
  return t;
}

inline HeatData run_heat(const ExperimentConfig& c) {
  HeatData d;
  d.M0 = build_manifold(c.grid);
  const auto& f = c.flow;
  const MetricSchedule& s = f.schedule;
  const WeightedManifold Mstart = manifold_at(d.M0, s, f.t0);
  DensityField u0;
  if (f.init == "kernel") u0 = heat_kernel_init(Mstart, default_center(Mstart), f.t0);
  else if (f.init == "uniform") u0 = uniform_density(Mstart, f.t0);
  else u0 = cosine_density(Mstart, f.init_amplitude, f.t0);
  d.h = d.M0.spacing();

  std::vector<double> T, H, I;
  auto observer = [&](std::size_t, const DensityField& u) {
    const double t = u.t;
    const WeightedManifold* Mt = &d.M0;
    WeightedManifold scaled;
    if (!s.is_static()) {
      scaled = manifold_at(d.M0, s, t);
      Mt = &scaled;
      d.max_measure_drift = std::max(d.max_measure_drift, measure_drift(d.M0, s, t));
    }
    const double mass = integrate(*Mt, u.values);
    d.max_mass_error = std::max(d.max_mass_error, std::abs(mass - 1.0));
    for (double v : u.values) d.min_density = std::min(d.min_density, v);
    T.push_back(t);
    H.push_back(entropy(*Mt, u.values));
    I.push_back(fisher_information(*Mt, u.values));
  };
  DensityTrace tr = evolve(u0, f.t_end, f.dt, output_times(f.t0, f.t_end, f.outputs), d.M0, s, f.scheme, observer);
  d.snaps = std::move(tr.snapshots);
  d.snap_step = std::move(tr.step_index);
  d.max_mass_correction = tr.max_mass_correction;
  d.trace = build_entropy_trace(std::move(T), std::move(H), std::move(I), c.grid.effective_m(), c.grid.K);
  return d;
}

// Natural magnitudes of the terms entering each residual.
inline double edi_scale(const EntropyTrace& tr, std::size_t k, double K, double m) {
  return std::abs(tr.dI[k]) + 2.0 * tr.I[k] * tr.I[k] / m + 2.0 * std::abs(K) * tr.I[k];
}

inline double niw_scale(const EntropyTrace& tr, std::size_t k) {
  const double m = tr.m, t = tr.t[k];
  return (2.0 * tr.N[k] / m) * (std::abs(tr.dI[k]) + (2.0 / m) * tr.I[k] * tr.I[k] + std::abs(tr.dWm[k]) / t +
                                (2.0 / m) * std::pow(m / (2.0 * t), 2)) +
         std::abs(tr.d2N[k]);
}

inline double niwK_scale(const EntropyTrace& tr, std::size_t k, double K) {
  const double m = tr.m, t = tr.t[k];
  return (2.0 * tr.N[k] / m) * (std::abs(tr.dI[k]) + (2.0 / m) * tr.I[k] * tr.I[k] + 2.0 * std::abs(K) * tr.I[k] +
                                std::abs(tr.dWmK[k]) / t + (2.0 / m) * std::pow(m * (1.0 + std::abs(K) * t) / (2.0 * t), 2)) +
         std::abs(tr.d2N[k]) + 2.0 * std::abs(K * tr.dN[k]);
}

inline std::vector<double> heat_row(const HeatData& d, const ExperimentConfig& c, std::size_t s) {
  const auto& tr = d.trace;
  const std::size_t k = d.snap_step[s];
  const double K = c.grid.K, m = tr.m;
  const bool in = tr.interior(k);
  const DensityField& u = d.snaps[s];
  const WeightedManifold Mt = manifold_at(d.M0, c.flow.schedule, u.t);
  const double liyau = li_yau_margin(Mt, u.values, {}, u.t, c.flow.alpha, c.flow.alpha > 1.0 ? c.flow.K_minus : 0.0, m).margin;
  const double ham = hamilton_margin(Mt, u.values, {}, u.t, c.flow.K_minus, m).margin;
  return {tr.t[k],
          tr.H[k],
          tr.I[k],
          tr.N[k],
          tr.dN[k],
          tr.d2N[k],
          tr.Hm[k],
          tr.Wm[k],
          tr.dWm[k],
          in ? edi_residual(tr, K, m, k) : nan(),
          in ? epci_residual(tr, K, k) : nan(),
          in ? niw_residual(tr, k) : nan(),
          liyau,
          ham,
          tr.N[k] * tr.I[k]};
}

inline void heat_checks(const ExperimentConfig& c, const HeatData& d, RunReport& rep) {
  const auto& tr = d.trace;
  const double K = c.grid.K, m = tr.m, n = d.M0.n, dt = c.flow.dt, h = d.h;
  const bool gaussian = c.flow.oracle == "gaussian";
  const double kappa = kappa_or_one(c.grid);
  const double t0 = tr.t.front();
  auto eps = [&](double Cc, double t, double scale) { return discretization_tolerance(Cc, dt, h, t, scale); };
  // Window where a truncated flat model still looks infinite.
  const double window_len = c.grid.kind == GridKind::interval ? c.grid.extent : 2.0 * c.grid.extent;
  auto in_window = [&](double t) { return std::sqrt(4.0 * t) <= window_len / 8.0 * (1.0 + 1e-12); };

  for (const auto& spec : c.checks) {
    CheckResult r;
    r.name = spec.name;
    const std::string& name = spec.name;
    const double C = tolerance_constant(c, name);

    if (name == "step") {
      auto a = Condition::le("max |mass - 1| over all steps");
      a.sample(d.max_mass_error, fixed_tolerance(c, name, 1e-10));
      auto b = Condition::gt("min density over all steps");
      b.sample(d.min_density, 0.0);
      auto e = Condition::le("max relative mass renormalisation");
      e.sample(d.max_mass_correction, 1e-9);
      r.conditions = {a, b, e};
      if (!c.flow.schedule.is_static()) {
        auto g = Condition::le("max relative measure drift under the potential rule");
        g.sample(d.max_measure_drift, 1e-10);
        r.conditions.push_back(g);
      }
    } else if (name == "entropy") {
      auto a = Condition::le("H - log(total measure)");
      const double logvol = std::log(d.M0.total_measure());
      for (std::size_t k = 0; k < tr.size(); ++k) a.sample(tr.H[k] - logvol, 1e-12 * std::max(1.0, std::abs(logvol)), tr.t[k]);
      r.conditions.push_back(a);
      if (gaussian) {
        auto b = Condition::le("|H - (n/2) log(4 pi e t) - log kappa|");
        const double tol = fixed_tolerance(c, name, 1e-3);
        for (std::size_t k = 0; k < tr.size(); ++k)
          b.sample(std::abs(tr.H[k] - 0.5 * n * std::log(4.0 * std::numbers::pi * std::numbers::e * tr.t[k]) -
                            std::log(kappa)),
                   tol, tr.t[k]);
        r.conditions.push_back(b);
      }
    } else if (name == "fisher_information") {
      auto a = Condition::le("|H' - I| (centred difference)");
      auto b = Condition::ge("I");
      for (std::size_t k = 1; k + 1 < tr.size(); ++k)
        a.sample(std::abs(tr.dH[k] - tr.I[k]), tr.fd_noise[k] + eps(C, tr.t[k], tr.I[k] + std::abs(tr.dH[k])), tr.t[k]);
      for (std::size_t k = 0; k < tr.size(); ++k) b.sample(tr.I[k], 0.0, tr.t[k]);
      r.conditions = {a, b};
      if (gaussian) {
        auto g = Condition::le("|2 t I / n - 1|");
        for (std::size_t k = 0; k < tr.size(); ++k) g.sample(std::abs(2.0 * tr.t[k] * tr.I[k] / n - 1.0), 0.01, tr.t[k]);
        r.conditions.push_back(g);
      }
    } else if (name == "entropy_power") {
      auto a = Condition::le("|dN/dt - (2/m) I N|");
      for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
        const double chain = tr.dN_chain[k];
        a.sample(std::abs(tr.dN[k] - chain), tr.fd_noise[k] * 2.0 * tr.N[k] / m + eps(C, tr.t[k], std::abs(chain) + std::abs(tr.dN[k])),
                 tr.t[k]);
      }
      r.conditions.push_back(a);
      if (gaussian) {
        auto b = Condition::le("|N / (kappa^{2/n} 4 pi e t) - 1|");
        for (std::size_t k = 0; k < tr.size(); ++k)
          b.sample(std::abs(tr.N[k] / (std::pow(kappa, 2.0 / n) * 4.0 * std::numbers::pi * std::numbers::e * tr.t[k]) - 1.0),
                   0.005, tr.t[k]);
        r.conditions.push_back(b);
      }
    } else if (name == "w_entropy") {
      auto a = Condition::le("dW_m/dt");
      for (std::size_t k = 1; k + 1 < tr.size(); ++k)
        a.sample(tr.dWm[k], eps(C, tr.t[k], 2.0 * tr.I[k] + tr.t[k] * std::abs(tr.dI[k]) + m / (2.0 * tr.t[k])), tr.t[k]);
      r.conditions.push_back(a);
      if (gaussian) {
        auto b = Condition::le("|W_m - log kappa|");
        for (std::size_t k = 1; k + 1 < tr.size(); ++k) b.sample(std::abs(w_entropy(tr, k) - std::log(kappa)), 0.01, tr.t[k]);
        r.conditions.push_back(b);
      }
    } else if (name == "edi_residual") {
      auto a = Condition::le("H'' + 2 H'^2/m + 2 K H'");
      auto b = Condition::le("|H'' + 2 H'^2/m + 2 K H'|");
      for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
        const double res = edi_residual(tr, K, m, k), e = eps(C, tr.t[k], edi_scale(tr, k, K, m));
        a.sample(res, e, tr.t[k]);
        b.sample(std::abs(res), e, tr.t[k]);
      }
      r.conditions.push_back(a);
      if (gaussian) r.conditions.push_back(b);
    } else if (name == "epci_residual") {
      auto a = Condition::le("N'' + 2 K N'");
      auto b = Condition::le("|epci - (2N/m) edi|");
      auto g = Condition::le("|N'' + 2 K N'|");
      for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
        const double res = epci_residual(tr, K, k);
        const double scale = 2.0 * tr.N[k] / m * edi_scale(tr, k, K, m);
        a.sample(res, eps(C, tr.t[k], scale), tr.t[k]);
        g.sample(std::abs(res), eps(C, tr.t[k], scale), tr.t[k]);
        b.sample(std::abs(res - 2.0 * tr.N[k] / m * edi_residual(tr, K, m, k)), 1e-12 * scale, tr.t[k]);
      }
      r.conditions = {a, b};
      if (gaussian) r.conditions.push_back(g);
    } else if (name == "niw_residual") {
      auto a = Condition::le("|NIW residual|");
      double worst = 0.0;
      for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
        const double res = std::abs(niw_residual(tr, k));
        a.sample(res, eps(C, tr.t[k], niw_scale(tr, k)), tr.t[k]);
      }
      double scale = 0.0;
      for (std::size_t k : d.snap_step)
        if (tr.interior(k)) {
          worst = std::max(worst, std::abs(niw_residual(tr, k)));
          scale = std::max(scale, niw_scale(tr, k));
        }
      rep.metrics["niw_residual"] = worst;
      rep.metric_scales["niw_residual"] = scale;
      r.conditions.push_back(a);
    } else if (name == "niw_residual_K") {
      auto a = Condition::le("|NIW(K) residual|");
      double worst = 0.0;
      for (std::size_t k = 1; k + 1 < tr.size(); ++k)
        a.sample(std::abs(niw_residual_K(tr, K, m, k)), eps(C, tr.t[k], niwK_scale(tr, k, K)), tr.t[k]);
      double scale = 0.0;
      for (std::size_t k : d.snap_step)
        if (tr.interior(k)) {
          worst = std::max(worst, std::abs(niw_residual_K(tr, K, m, k)));
          scale = std::max(scale, niwK_scale(tr, k, K));
        }
      rep.metrics["niw_residual_K"] = worst;
      rep.metric_scales["niw_residual_K"] = scale;
      r.conditions.push_back(a);
    } else if (name == "gamma2_integral") {
      auto a = Condition::le("|H'' + 2 int Gamma_2(log u) u|");
      double worst = 0.0, scale = 0.0;
      for (std::size_t s = 0; s < d.snaps.size(); ++s) {
        const std::size_t k = d.snap_step[s];
        if (!tr.interior(k)) continue;
        const double g2 = gamma2_integral(d.M0, d.snaps[s].values);
        scale = std::max(scale, std::abs(tr.dI[k]) + 2.0 * std::abs(g2));
        const double gap = std::abs(tr.dI[k] + 2.0 * g2);
        a.sample(gap, eps(C, tr.t[k], std::abs(tr.dI[k]) + 2.0 * std::abs(g2)), tr.t[k]);
        worst = std::max(worst, gap);
      }
      rep.metrics["gamma2_integral"] = worst;
      rep.metric_scales["gamma2_integral"] = scale;
      r.conditions.push_back(a);
    } else if (name == "nn1_decomposition") {
      auto a = Condition::le("|sum of terms - (m/2N)(N'' + 2K N')| / scale");
      auto terms = Condition::le("largest term");
      bool bound_holds = true;
      for (std::size_t s = 0; s < d.snaps.size(); ++s) {
        const std::size_t k = d.snap_step[s];
        if (!tr.interior(k)) continue;
        const double t = tr.t[k];
        const WeightedManifold Mt = manifold_at(d.M0, c.flow.schedule, t);
        const NN1Terms q = nn1_decomposition(Mt, d.snaps[s].values, tr, K, m, k, c.flow.schedule.rate(t));
        const double scale = edi_scale(tr, k, K, m);
        a.sample(std::abs(q.sum() - q.target) / scale, fixed_tolerance(c, name, 0.02), t);
        if (q.min_curvature_margin < -1e-12) bound_holds = false;
        const double e = eps(kToleranceConstant, t, scale);
        for (double v : {q.curvature, q.variance, q.drift, q.traceless}) terms.sample(v, e, t);
      }
      r.conditions.push_back(a);
      if (bound_holds) r.conditions.push_back(terms);
      r.values["declared_bound_holds"] = bound_holds ? 1.0 : 0.0;
    } else if (name == "li_yau_margin" || name == "hamilton_margin") {
      const bool ly = name == "li_yau_margin";
      auto a = Condition::ge("relative pointwise margin");
      auto b = Condition::le("I / integrated bound - 1");
      for (std::size_t s = 0; s < d.snaps.size(); ++s) {
        const DensityField& u = d.snaps[s];
        const WeightedManifold Mt = manifold_at(d.M0, c.flow.schedule, u.t);
        const HarnackReport hr =
            ly ? li_yau_margin(Mt, u.values, {}, u.t, c.flow.alpha, c.flow.alpha > 1.0 ? c.flow.K_minus : 0.0, m)
               : hamilton_margin(Mt, u.values, {}, u.t, c.flow.K_minus, m);
        const double e = eps(C, u.t, 1.0);
        a.sample(hr.relative_margin, -e, u.t);
        b.sample(hr.fisher / hr.fisher_bound - 1.0, e, u.t);
      }
      r.conditions = {a, b};
    } else if (name == "initial_slope_check") {
      auto a = Condition::le("max t I - m/2 on [t0, 4 t0]");
      a.sample(initial_slope_check(tr, m), eps(C, t0, 0.5 * m), t0);
      r.conditions.push_back(a);
    } else if (name == "bochner_residual") {
      const auto [fine, coarse] = bochner_pair(c.grid);
      auto a = Condition::ge("observed order between h and 2h");
      const double order = fine < 1e-10 ? std::numeric_limits<double>::infinity() : std::log2(coarse / fine);
      a.sample(order, fixed_tolerance(c, name, kMinOrder));
      r.conditions.push_back(a);
      r.values["residual"] = fine;
      r.values["residual_2h"] = coarse;
      rep.metrics["bochner_residual"] = fine;
    } else if (name == "entropy_gap") {
      const auto gap = entropy_gap(tr, m);
      auto a = Condition::le("dH_m/dt in the valid window");
      auto b = Condition::le("|H_m - log kappa| in the valid window");
      const double band = fixed_tolerance(c, name, 0.1);
      for (std::size_t k = 0; k < tr.size(); ++k) {
        if (!in_window(tr.t[k])) continue;
        b.sample(std::abs(gap[k] - std::log(kappa)), band, tr.t[k]);
        if (tr.interior(k))
          a.sample(tr.dH[k] - m / (2.0 * tr.t[k]), tr.fd_noise[k] + eps(kToleranceConstant, tr.t[k], tr.I[k] + m / (2.0 * tr.t[k])),
                   tr.t[k]);
      }
      r.conditions = {a, b};
      r.values["kappa"] = kappa;
      r.values["log_kappa"] = std::log(kappa);
    } else if (name == "isoperimetric_product") {
      const auto Q = isoperimetric_product(tr);
      auto a = Condition::le("d/dt (e^{2Kt} Q) e^{-2Kt}");
      for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
        const double dQ = detail::d1(tr.t, Q, k);
        const double scale = tr.N[k] * edi_scale(tr, k, K, m);
        a.sample(dQ + 2.0 * K * Q[k], eps(C, tr.t[k], scale), tr.t[k]);
      }
      r.conditions.push_back(a);
      bool flat = true;
      try {
        (void)avr_kappa(c.grid);
      } catch (const Error&) {
        flat = false;
      }
      if (flat && K == 0.0) {
        const double gam = gamma_constant(m, kappa);
        auto b = Condition::ge("Q / gamma in the valid window");
        for (std::size_t k = 0; k < tr.size(); ++k)
          if (in_window(tr.t[k])) b.sample(Q[k] / gam, 0.99, tr.t[k]);
        r.conditions.push_back(b);
        r.values["gamma"] = gam;
        r.values["gamma_alt"] = gamma_constant_alt(m, kappa);
        if (gaussian) {
          auto g = Condition::le("|Q / gamma - 1|");
          for (std::size_t k = 0; k < tr.size(); ++k) g.sample(std::abs(Q[k] / gam - 1.0), 0.005, tr.t[k]);
          r.conditions.push_back(g);
        }
      }
    } else if (name == "avr_kappa") {
      auto a = Condition::gt("kappa");
      a.sample(kappa, 0.0);
      auto b = Condition::le("kappa");
      b.sample(kappa, 1.0);
      r.conditions = {a, b};
      r.values["kappa"] = kappa;
    } else if (name == "stam_lsi_slack") {
      const double gam = gamma_constant(m, kappa);
      auto a = Condition::ge("Stam slack of sqrt(u)");
      for (const auto& u : d.snaps) {
        if (!in_window(u.t)) continue;
        Field f(u.values.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sqrt(u.values[i]);
        a.sample(stam_lsi_slack(d.M0, f, gam, m), -eps(C, u.t, 0.5 * m), u.t);
      }
      r.conditions.push_back(a);
      r.values["gamma"] = gam;
      r.values["gamma_alt"] = gamma_constant_alt(m, kappa);
    }
    rep.checks.push_back(std::move(r));
  }
  // Dissipation size for refinement studies.
  double worst = 0.0, scale = 0.0;
  for (std::size_t k : d.snap_step)
    if (tr.interior(k)) {
      worst = std::max(worst, std::abs(tr.dH[k] - tr.I[k]));
      scale = std::max(scale, tr.I[k] + std::abs(tr.dH[k]));
    }
  rep.metrics["fisher_information"] = worst;
  rep.metric_scales["fisher_information"] = scale;
  if (!rep.metrics.count("bochner_residual") && d.M0.structured() && c.grid.kind != GridKind::icosphere) {
    const WeightedManifold& M = d.M0;
    rep.metrics["bochner_residual"] = bochner_residual(M, bochner_test_field(M));
  }
}

struct RicciData {
  std::vector<double> t, tau, H, I, F, W, soliton, mass, range, R_integral, c, sample_t;
  PerelmanTrace trace;
  std::vector<std::size_t> snap;  // indices into the trace (increasing tau)
  double h = 0.0;
};

inline RicciData run_ricci(const ExperimentConfig& c) {
  const auto& f = c.flow;
  const bool torus = c.grid.kind == GridKind::torus2d;
  RicciFlowState st0 = torus ? torus_state(c.grid, c.grid.conformal_amplitude, f.t_end + f.tau0)
                             : sphere_state(c.grid.resolution, 1.0);
  st0.t = f.t0;
  RicciFlowState st = flow_forward(st0, f.t_end, f.dt);
  RicciData d;
  for (const auto& s : st.history->samples) {
    RicciFlowState probe = st;
    probe.t = s.t;
    probe.w = s.w;
    probe.c = s.c;
    const WeightedManifold M = metric_manifold(probe);
    const Field R = scalar_curvature(probe, M);
    double integral = 0.0;
    for (std::size_t i = 0; i < M.size(); ++i) integral += R[i] * M.volume[i];
    d.R_integral.push_back(integral);
    d.range.push_back(torus ? *std::max_element(s.w.begin(), s.w.end()) - *std::min_element(s.w.begin(), s.w.end())
                            : 0.0);
    d.c.push_back(s.c);
    d.sample_t.push_back(s.t);
  }
  {
    const WeightedManifold M = metric_manifold(st);
    d.h = M.spacing();
    if (f.init == "uniform") st.u = uniform_density(M, st.t).values;
    else if (f.init == "kernel") {
      const std::size_t center = torus ? static_cast<std::size_t>(M.ny / 2) * M.nx + M.nx / 2 : 0;
      st.u = heat_kernel_init(M, center, st.tau()).values;
    } else {
      st.u = cosine_density(M, f.init_amplitude, st.t).values;
    }
  }
  const auto steps = static_cast<std::size_t>(std::llround((f.t_end - f.t0) / f.dt));
  for (std::size_t k = 0;; ++k) {
    const WeightedManifold M = metric_manifold(st);
    d.t.push_back(st.t);
    d.tau.push_back(st.tau());
    d.H.push_back(perelman_entropy(st, M));
    const Field lu = log_density(st.u);
    const Field g = carre_du_champ(M, lu, lu);
    double fisher = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < M.size(); ++i) {
      fisher += g[i] * st.u[i] * M.volume[i];
      mass += st.u[i] * M.volume[i];
    }
    d.I.push_back(fisher);
    d.mass.push_back(mass);
    d.F.push_back(perelman_f(st, M));
    d.W.push_back(perelman_w(st, M));
    d.soliton.push_back(soliton_residual(st, M));
    if (k == steps) break;
    st = conjugate_heat_step(st, f.dt);
    st.t = f.t_end - static_cast<double>(k + 1) * f.dt;
  }
  d.trace.tau = d.tau;
  d.trace.t = d.t;
  d.trace.H = d.H;
  d.trace.F = d.F;
  d.trace.W = d.W;
  d.trace.soliton = d.soliton;
  finish_perelman_trace(d.trace);
  const std::size_t n = d.tau.size();
  for (int i = 0; i < f.outputs; ++i) {
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n - 1) * i / (f.outputs - 1)));
    if (d.snap.empty() || d.snap.back() != k) d.snap.push_back(k);
  }
  return d;
}

inline double nfw_scale(const PerelmanTrace& p, std::size_t k) {
  const double tau = p.tau[k], N = p.N[k];
  const double gap = p.F[k] - 1.0 / tau;
  return std::abs(p.d2N_dtau2[k]) + N * (gap * gap + std::abs(p.dW_dt[k]) / tau) + N / (tau * tau);
}

inline void ricci_checks(const ExperimentConfig& c, const RicciData& d, RunReport& rep) {
  const auto& p = d.trace;
  const bool torus = c.grid.kind == GridKind::torus2d;
  const bool sphere_oracle = c.flow.oracle == "round_sphere";
  const double dt = c.flow.dt, h = d.h;
  auto eps = [&](double C, double tau, double scale) { return discretization_tolerance(C, dt, h, tau, scale); };
  double worst_nfw = 0.0, nfw_size = 0.0;
  for (std::size_t k : d.snap)
    if (p.interior(k)) {
      worst_nfw = std::max(worst_nfw, std::abs(nfw_residual(p, k)));
      nfw_size = std::max(nfw_size, nfw_scale(p, k));
    }
  rep.metrics["nfw_residual"] = worst_nfw;
  rep.metric_scales["nfw_residual"] = nfw_size;

  for (const auto& spec : c.checks) {
    CheckResult r;
    r.name = spec.name;
    const std::string& name = spec.name;
    const double C = tolerance_constant(c, name);
    if (name == "ricci_step") {
      auto gb = Condition::le(torus ? "|int R dv| (Gauss-Bonnet, genus 1)" : "|int R dv - 8 pi| (Gauss-Bonnet)");
      for (double v : d.R_integral) gb.sample(std::abs(v - (torus ? 0.0 : 8.0 * std::numbers::pi)), fixed_tolerance(c, name, 1e-6));
      r.conditions.push_back(gb);
      if (torus) {
        auto a = Condition::le("increase of max w - min w between steps");
        for (std::size_t k = 1; k < d.range.size(); ++k) a.sample(d.range[k] - d.range[k - 1], 0.0);
        r.conditions.push_back(a);
      } else {
        auto a = Condition::le("|c(t) - (1 - 2t)|");
        for (std::size_t k = 0; k < d.c.size(); ++k) a.sample(std::abs(d.c[k] - (1.0 - 2.0 * d.sample_t[k])), 1e-12, d.sample_t[k]);
        r.conditions.push_back(a);
      }
    } else if (name == "conjugate_heat_step") {
      auto a = Condition::le("|int u dv - 1|");
      for (std::size_t k = 0; k < d.mass.size(); ++k) a.sample(std::abs(d.mass[k] - 1.0), fixed_tolerance(c, name, 1e-9), d.t[k]);
      r.conditions.push_back(a);
    } else if (name == "perelman_f") {
      auto a = Condition::le("|dH/dtau - F|");
      for (std::size_t k = 1; k + 1 < p.size(); ++k)
        a.sample(std::abs(p.dH_dtau[k] - p.F[k]), eps(C, p.tau[k], std::abs(p.F[k]) + std::abs(p.dH_dtau[k])), p.t[k]);
      r.conditions.push_back(a);
      if (sphere_oracle) {
        auto b = Condition::le("|F tau - 1|");
        for (std::size_t k = 0; k < p.size(); ++k) b.sample(std::abs(p.F[k] * p.tau[k] - 1.0), 0.01, p.t[k]);
        r.conditions.push_back(b);
      }
    } else if (name == "perelman_w") {
      auto a = Condition::ge("dW/dt");
      for (std::size_t k = 1; k + 1 < p.size(); ++k)
        a.sample(p.dW_dt[k], -eps(C, p.tau[k], std::abs(p.F[k]) + 1.0 / p.tau[k]), p.t[k]);
      r.conditions.push_back(a);
      if (sphere_oracle) {
        auto b = Condition::le("|dW/dt|");
        for (std::size_t k = 1; k + 1 < p.size(); ++k) b.sample(std::abs(p.dW_dt[k]), 1e-6, p.t[k]);
        r.conditions.push_back(b);
      }
    } else if (name == "soliton_residual") {
      if (sphere_oracle) {
        auto a = Condition::le("soliton residual");
        for (std::size_t k = 0; k < p.size(); ++k) a.sample(p.soliton[k], fixed_tolerance(c, name, 1e-6), p.t[k]);
        r.conditions.push_back(a);
      } else {
        auto a = Condition::gt("soliton residual");
        for (std::size_t k = 0; k < p.size(); ++k) a.sample(p.soliton[k], 0.0, p.t[k]);
        r.conditions.push_back(a);
      }
    } else if (name == "nfw_residual") {
      auto a = Condition::le("|NFW residual|");
      auto b = Condition::ge("d2N/dtau2");
      for (std::size_t k = 1; k + 1 < p.size(); ++k) {
        const double e = eps(C, p.tau[k], nfw_scale(p, k));
        a.sample(std::abs(nfw_residual(p, k)), e, p.t[k]);
        b.sample(p.d2N_dtau2[k], -e, p.t[k]);
      }
      r.conditions = {a, b};
      if (sphere_oracle) {
        auto g = Condition::le("|d2N/dtau2| / |dN/dtau|");
        for (std::size_t k = 1; k + 1 < p.size(); ++k) g.sample(std::abs(p.d2N_dtau2[k]) / std::abs(p.dN_dtau[k]), 1e-6, p.t[k]);
        r.conditions.push_back(g);
      }
    }
    rep.checks.push_back(std::move(r));
  }
}

inline std::vector<double> ricci_row(const RicciData& d, std::size_t k) {
  const auto& p = d.trace;
  std::vector<double> row(heat_columns().size(), nan());
  row[0] = p.t[k];
  row[1] = p.H[k];
  row[2] = d.I[k];
  row[3] = p.N[k];
  row[4] = -p.dN_dtau[k];
  row[5] = p.d2N_dtau2[k];
  for (double v : {p.tau[k], p.F[k], p.W[k], p.d2N_dtau2[k], p.soliton[k]}) row.push_back(v);
  return row;
}

}  // namespace detail

/// Runs the scenario and evaluates every configured check; writes nothing.
inline RunReport execute(const ExperimentConfig& c) {
  RunReport rep;
  rep.config = c;
  if (c.flow.type == FlowType::heat) {
    const detail::HeatData d = detail::run_heat(c);
    rep.columns = heat_columns();
    for (std::size_t s = 0; s < d.snaps.size(); ++s) rep.rows.push_back(detail::heat_row(d, c, s));
    detail::heat_checks(c, d, rep);
  } else {
    const detail::RicciData d = detail::run_ricci(c);
    rep.columns = ricci_columns();
    // rows in increasing t (decreasing tau)
    for (auto it = d.snap.rbegin(); it != d.snap.rend(); ++it) rep.rows.push_back(detail::ricci_row(d, *it));
    detail::ricci_checks(c, d, rep);
  }
  return rep;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_text(const RunReport& r) {
  std::string out;
  for (std::size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + r.columns[i];
  out += '\n';
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

inline nlohmann::ordered_json check_json(const CheckResult& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["passed"] = c.passed();
  auto conds = nlohmann::ordered_json::array();
  for (const auto& k : c.conditions) {
    nlohmann::ordered_json e;
    e["what"] = k.what;
    e["relation"] = k.relation;
    e["value"] = number_json(k.value);
    e["limit"] = number_json(k.limit);
    e["t"] = number_json(k.t);
    e["passed"] = k.passed;
    conds.push_back(e);
  }
  j["conditions"] = conds;
  if (!c.values.empty()) {
    nlohmann::ordered_json v;
    for (const auto& [key, x] : c.values) v[key] = number_json(x);
    j["values"] = v;
  }
  return j;
}

inline std::string json_text(const RunReport& r) {
  nlohmann::ordered_json j;
  j["format"] = kRunFormat;
  j["scenario"] = r.config.scenario;
  j["passed"] = r.passed();
  j["rows"] = r.rows.size();
  auto checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) checks.push_back(check_json(c));
  j["checks"] = checks;
  nlohmann::ordered_json m;
  for (const auto& [k, v] : r.metrics) m[k] = number_json(v);
  j["metrics"] = m;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : r.config.raw) cfg[k] = v;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

/// Output root: $EPLAB_OUTPUT_ROOT if set, otherwise ./out.
inline std::filesystem::path output_root() {
  if (const char* env = std::getenv("EPLAB_OUTPUT_ROOT"); env && *env) return env;
  return "out";
}

inline std::filesystem::path output_dir(const ExperimentConfig& c) {
  const std::filesystem::path d = c.output.dir;
  return d.is_absolute() ? d : output_root() / d;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::invalid_spec, "cannot write '" + p.string() + "'");
  out << text;
}

/// Runs, evaluates and writes `trace.csv` and `summary.json` under the output directory.
inline RunReport run_experiment(const ExperimentConfig& c) {
  RunReport rep = execute(c);
  const auto dir = output_dir(c);
  std::filesystem::create_directories(dir);
  if (c.output.csv) write_file(dir / "trace.csv", csv_text(rep));
  if (c.output.json) write_file(dir / "summary.json", json_text(rep));
  return rep;
}

struct StudyReport {
  ExperimentConfig config;
  int levels = 0;
  std::vector<std::string> residuals;
  std::vector<std::map<std::string, double>> sizes;  // per level
  std::map<std::string, std::vector<double>> orders;
  std::vector<RunReport> runs;

  bool passed() const {
    for (const auto& [name, o] : orders)
      for (double v : o)
        if (!(v >= kMinOrder)) return false;
    return true;
  }
  double min_order(const std::string& name) const {
    const auto it = orders.find(name);
    if (it == orders.end() || it->second.empty()) return std::numeric_limits<double>::quiet_NaN();
    return *std::min_element(it->second.begin(), it->second.end());
  }
};

/// Config for refinement level l: dt / 2^l and, when refining space, resolution * 2^l.
inline ExperimentConfig refined(const ExperimentConfig& c, int level) {
  ExperimentConfig r = c;
  const double f = std::pow(2.0, level);
  r.flow.dt = c.flow.dt / f;
  r.raw["flow.dt"] = format_number(r.flow.dt);
  if (c.study.refine_space) {
    if (c.grid.kind == GridKind::icosphere) {
      r.grid.resolution = c.grid.resolution + level;
    } else {
      r.grid.resolution = c.grid.resolution << level;
      if (c.grid.resolution_y > 0) r.grid.resolution_y = c.grid.resolution_y << level;
    }
    r.raw["grid.resolution"] = std::to_string(r.grid.resolution);
  }
  return r;
}

inline std::vector<std::string> study_residuals(const ExperimentConfig& c) {
  if (!c.study.residuals.empty()) return c.study.residuals;
  if (c.flow.type == FlowType::ricci) return {"nfw_residual"};
  std::vector<std::string> out = {"fisher_information"};
  for (const char* n : {"niw_residual", "niw_residual_K", "gamma2_integral", "bochner_residual"})
    if (c.check(n)) out.push_back(n);
  return out;
}

/// Reruns the scenario over `levels` refinements and reports log2(r_l / r_{l+1})
/// for each identity residual.
inline StudyReport refinement_study(const ExperimentConfig& c, int levels) {
  if (levels < 2) throw Error(Errc::config_error, "a refinement study needs at least two levels");
  StudyReport s;
  s.config = c;
  s.levels = levels;
  s.residuals = study_residuals(c);
  for (const auto& name : s.residuals) {
    const bool heat_ok = name == "fisher_information" || name == "niw_residual" || name == "niw_residual_K" ||
                         name == "gamma2_integral" || name == "bochner_residual";
    const bool ok = c.flow.type == FlowType::ricci ? name == "nfw_residual" : heat_ok;
    if (!ok) throw Error(Errc::config_error, "study.residuals: '" + name + "' is not a refinable residual here");
  }
  ExperimentConfig base = c;
  // every studied residual must be evaluated at each level
  for (const auto& name : s.residuals)
    if (name != "fisher_information" && name != "bochner_residual" && !base.check(name))
      base.checks.push_back({name, std::nullopt});
  for (int l = 0; l < levels; ++l) {
    RunReport r = execute(refined(base, l));
    std::map<std::string, double> sz;
    for (const auto& name : s.residuals) sz[name] = r.metrics.count(name) ? r.metrics.at(name) : std::numeric_limits<double>::quiet_NaN();
    s.sizes.push_back(sz);
    s.runs.push_back(std::move(r));
  }
  for (const auto& name : s.residuals) {
    std::vector<double> o;
    for (int l = 0; l + 1 < levels; ++l) {
      const double a = s.sizes[l].at(name), b = s.sizes[l + 1].at(name);
      const double floor = kRoundoffFloor * std::max(1.0, s.runs[l + 1].metric_scales.count(name) ? s.runs[l + 1].metric_scales.at(name) : 1.0);
      o.push_back(b <= floor ? std::numeric_limits<double>::infinity() : std::log2(a / b));
    }
    s.orders[name] = o;
  }
  return s;
}

inline std::string study_json_text(const StudyReport& s) {
  nlohmann::ordered_json j;
  j["format"] = kStudyFormat;
  j["scenario"] = s.config.scenario;
  j["passed"] = s.passed();
  j["levels"] = s.levels;
  j["min_order"] = kMinOrder;
  auto res = nlohmann::ordered_json::array();
  for (const auto& name : s.residuals) {
    nlohmann::ordered_json e;
    e["name"] = name;
    auto sizes = nlohmann::ordered_json::array();
    for (const auto& lv : s.sizes) sizes.push_back(number_json(lv.at(name)));
    e["sizes"] = sizes;
    auto orders = nlohmann::ordered_json::array();
    for (double v : s.orders.at(name)) orders.push_back(number_json(v));
    e["orders"] = orders;
    bool ok = true;
    for (double v : s.orders.at(name)) ok = ok && v >= kMinOrder;
    e["passed"] = ok;
    res.push_back(e);
  }
  j["residuals"] = res;
  auto lv = nlohmann::ordered_json::array();
  for (const auto& r : s.runs) {
    nlohmann::ordered_json e;
    e["dt"] = r.config.flow.dt;
    e["resolution"] = r.config.grid.resolution;
    e["checks_passed"] = r.passed();
    lv.push_back(e);
  }
  j["runs"] = lv;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : s.config.raw) cfg[k] = v;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

inline StudyReport run_study(const ExperimentConfig& c, int levels) {
  StudyReport s = refinement_study(c, levels);
  const auto dir = output_dir(c);
  std::filesystem::create_directories(dir);
  for (std::size_t l = 0; l < s.runs.size(); ++l)
    if (c.output.csv) write_file(dir / ("level" + std::to_string(l) + ".csv"), csv_text(s.runs[l]));
  if (c.output.json) write_file(dir / "study.json", study_json_text(s));
  return s;
}

}  // namespace eplab
