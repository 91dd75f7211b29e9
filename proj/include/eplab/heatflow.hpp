#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "eplab/error.hpp"
#include "eplab/manifold.hpp"

namespace eplab {

/// Probability density with respect to mu, stamped with its time.
struct DensityField {
  Field values;
  double t = 0.0;
};

inline double mass(const WeightedManifold& M, const DensityField& u) { return integrate(M, u.values); }

enum class ScheduleKind { constant, exponential, linear_shrink };

inline ScheduleKind parse_schedule(const std::string& s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "exponential") return ScheduleKind::exponential;
  if (s == "linear_shrink") return ScheduleKind::linear_shrink;
  throw Error(Errc::config_error, "unknown schedule '" + s + "'");
}

inline const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::exponential: return "exponential";
    case ScheduleKind::linear_shrink: return "linear_shrink";
  }
  return "?";
}

/// Conformal metric family g(t) = c(t) g0 with the potential rule
/// d(phi)/dt = Tr(dg/dt)/2 = (n/2) c'/c, which keeps mu = e^{-phi} dv fixed.
struct MetricSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double K = 0.0;  // exponential rate, c = e^{2Kt}

  double scale(double t) const {
    switch (kind) {
      case ScheduleKind::constant: return 1.0;
      case ScheduleKind::exponential: return std::exp(2.0 * K * t);
      case ScheduleKind::linear_shrink: return 1.0 - 2.0 * t;
    }
    return 1.0;
  }

  /// c'(t) / c(t); the time derivative of g is rate * g.
  double rate(double t) const {
    switch (kind) {
      case ScheduleKind::constant: return 0.0;
      case ScheduleKind::exponential: return 2.0 * K;
      case ScheduleKind::linear_shrink: return -2.0 / (1.0 - 2.0 * t);
    }
    return 0.0;
  }

  double potential_shift(double t, int n) const { return 0.5 * n * std::log(scale(t)); }

  bool is_static() const { return kind == ScheduleKind::constant; }

  void validate_over(double t0, double t1) const {
    if (!(scale(t0) > 0.0) || !(scale(t1) > 0.0))
      throw Error(Errc::invalid_spec, "metric schedule scale must stay positive");
  }
};

/// Manifold carrying the metric g(t) of the schedule (mu is unchanged).
inline WeightedManifold manifold_at(const WeightedManifold& M0, const MetricSchedule& s, double t) {
  if (s.is_static()) return M0;
  return rescaled(M0, s.scale(t), Rescaling::measure_preserving);
}

/// |mu(t)(M) - mu(0)(M)| / mu(0)(M), evaluated from e^{-phi(t)} c(t)^{n/2} v0
/// rather than from the stored measure.
inline double measure_drift(const WeightedManifold& M0, const MetricSchedule& s, double t) {
  const double c = s.scale(t);
  const double shift = s.potential_shift(t, M0.n);
  double base = 0.0, now = 0.0;
  for (std::size_t i = 0; i < M0.size(); ++i) {
    base += std::exp(-M0.phi[i]) * M0.volume[i];
    now += std::exp(-(M0.phi[i] + shift)) * std::pow(c, 0.5 * M0.n) * M0.volume[i];
  }
  return std::abs(now - base) / base;
}

inline DensityField normalized(const WeightedManifold& M, Field values, double t) {
  const double z = integrate(M, values);
  for (auto& v : values) v /= z;
  return {std::move(values), t};
}

inline DensityField uniform_density(const WeightedManifold& M, double t) {
  return normalized(M, Field(M.size(), 1.0), t);
}

/// 1 + amplitude cos(2 pi x / L) along the first coordinate, normalised.
inline DensityField cosine_density(const WeightedManifold& M, double amplitude, double t) {
  Field v(M.size());
  for (std::size_t i = 0; i < M.size(); ++i)
    v[i] = 1.0 + amplitude * std::cos(2.0 * std::numbers::pi * M.x[i] / M.spec.extent);
  return normalized(M, std::move(v), t);
}

/// Small-time surrogate of the heat kernel centred at `center`:
/// exp(-d^2 / 4 t0) normalised against mu. For radial surfaces the centre is the pole.
inline DensityField heat_kernel_init(const WeightedManifold& M, std::size_t center, double t0) {
  if (!(t0 > 0.0)) throw Error(Errc::unresolved_kernel, "t0 must be positive");
  const double width = std::sqrt(4.0 * t0);
  if (width < 3.0 * M.spacing())
    throw Error(Errc::unresolved_kernel, "sqrt(4 t0) must be at least three grid spacings");
  if (width > 0.25 * M.injectivity_scale())
    throw Error(Errc::domain_too_small, "sqrt(4 t0) exceeds a quarter of the injectivity scale");
  if (center >= M.size()) throw Error(Errc::invalid_spec, "centre vertex out of range");
  Field v(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) {
    const double d = M.distance(center, i);
    v[i] = std::max(std::exp(-d * d / (4.0 * t0)), 1e-300);
  }
  return normalized(M, std::move(v), t0);
}

/// Vertex nearest to the middle of the domain (pole for radial surfaces).
inline std::size_t default_center(const WeightedManifold& M) {
  switch (M.spec.kind) {
    case GridKind::interval: return static_cast<std::size_t>(M.nx / 2);
    case GridKind::circle: return static_cast<std::size_t>(M.nx / 2);
    case GridKind::torus2d: return static_cast<std::size_t>((M.ny / 2) * M.nx + M.nx / 2);
    default: return 0;
  }
}

enum class TimeScheme { backward_euler, crank_nicolson };

inline TimeScheme parse_scheme(const std::string& s) {
  if (s == "backward_euler") return TimeScheme::backward_euler;
  if (s == "crank_nicolson") return TimeScheme::crank_nicolson;
  throw Error(Errc::config_error, "unknown time scheme '" + s + "'");
}

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Graph stiffness S with (S u)_i = sum_j c_ij (u_i - u_j), so mu L = -S.
inline SparseMatrix stiffness_matrix(const WeightedManifold& M) {
  const auto& g = M.graph;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.neighbors.size() + M.size());
  for (std::size_t i = 0; i < M.size(); ++i) {
    double diag = 0.0;
    for (int e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      trip.emplace_back(static_cast<int>(i), g.neighbors[e], -g.conductance[e]);
      diag += g.conductance[e];
    }
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
  }
  SparseMatrix S(static_cast<int>(M.size()), static_cast<int>(M.size()));
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

/// Implicit integrator for du/dt = L_{g(t)} u. Each step solves the SPD system
/// (diag(mu) + theta dt S / c) u_new = (diag(mu) - (1 - theta) dt S / c) u
/// with a sparse Cholesky factorisation, cached per (dt, c).
class HeatStepper {
 public:
  HeatStepper(const WeightedManifold& M, MetricSchedule schedule = {},
              TimeScheme scheme = TimeScheme::backward_euler)
      : M_(&M), schedule_(schedule), scheme_(scheme), stiffness_(stiffness_matrix(M)) {}

  DensityField step(const DensityField& u, double dt) {
    if (!(dt > 0.0)) throw Error(Errc::invalid_spec, "dt must be positive");
    const double t1 = u.t + dt;
    schedule_.validate_over(u.t, t1);
    const double c1 = schedule_.scale(t1);
    const double theta = scheme_ == TimeScheme::backward_euler ? 1.0 : 0.5;
    const std::size_t n = M_->size();
    Eigen::Map<const Eigen::VectorXd> uin(u.values.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<const Eigen::VectorXd> mu(M_->measure.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs = mu.cwiseProduct(uin);
    if (theta < 1.0) {
      const double c0 = schedule_.scale(u.t);
      rhs -= ((1.0 - theta) * dt / c0) * (stiffness_ * uin);
    }
    auto& solver = factor(theta * dt / c1);
    Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw Error(Errc::solve_failure, "sparse Cholesky solve failed");

    DensityField out{Field(x.data(), x.data() + n), t1};
    double vmax = 0.0;
    for (double v : out.values) vmax = std::max(vmax, v);
    for (auto& v : out.values) {
      if (v < -1e-12 * vmax) throw Error(Errc::positivity_loss, "negative density after step");
      if (v <= 0.0) v = std::numeric_limits<double>::min();
    }
    const double before = integrate(*M_, u.values);
    const double after = integrate(*M_, out.values);
    const double rel = std::abs(after - before) / before;
    if (rel > 1e-9) throw Error(Errc::mass_drift, "mass correction exceeds 1e-9 relative");
    const double f = before / after;
    for (auto& v : out.values) v *= f;
    max_mass_correction_ = std::max(max_mass_correction_, rel);
    return out;
  }

  double max_mass_correction() const { return max_mass_correction_; }
  const MetricSchedule& schedule() const { return schedule_; }

 private:
  using Solver = Eigen::SimplicialLDLT<SparseMatrix>;

  Solver& factor(double coeff) {
    if (auto it = cache_.find(coeff); it != cache_.end()) return *it->second;
    SparseMatrix A = coeff * stiffness_;
    for (std::size_t i = 0; i < M_->size(); ++i) A.coeffRef(static_cast<int>(i), static_cast<int>(i)) += M_->measure[i];
    if (cache_.size() < 4) {
      auto solver = std::make_unique<Solver>();
      solver->compute(A);
      if (solver->info() != Eigen::Success) throw Error(Errc::solve_failure, "factorisation failed");
      auto& ref = *solver;
      cache_.emplace(coeff, std::move(solver));
      return ref;
    }
    // Time-dependent metrics change the coefficient every step; the sparsity
    // pattern does not, so only the numeric factorisation is redone.
    if (!rolling_analyzed_) {
      rolling_.analyzePattern(A);
      rolling_analyzed_ = true;
    }
    rolling_.factorize(A);
    if (rolling_.info() != Eigen::Success) throw Error(Errc::solve_failure, "factorisation failed");
    return rolling_;
  }

  const WeightedManifold* M_;
  MetricSchedule schedule_;
  TimeScheme scheme_;
  SparseMatrix stiffness_;
  std::map<double, std::unique_ptr<Solver>> cache_;
  Solver rolling_;
  bool rolling_analyzed_ = false;
  double max_mass_correction_ = 0.0;
};

/// One implicit step (builds a fresh stepper; use HeatStepper for loops).
inline DensityField step(const DensityField& u, double dt, const WeightedManifold& M,
                         const MetricSchedule& schedule = {}, TimeScheme scheme = TimeScheme::backward_euler) {
  HeatStepper s(M, schedule, scheme);
  return s.step(u, dt);
}

struct DensityTrace {
  std::vector<DensityField> snapshots;
  std::vector<std::size_t> step_index;  // step number of each snapshot
  double max_mass_correction = 0.0;     // largest relative renormalisation applied by a step
};

using StepObserver = std::function<void(std::size_t, const DensityField&)>;

/// Runs `step` from u0.t to t_end. Snapshots are taken at the step nearest to
/// each requested output time and stamped with the realised time. The observer
/// (if any) sees every step including the initial field.
inline DensityTrace evolve(const DensityField& u0, double t_end, double dt, const std::vector<double>& output_times,
                           const WeightedManifold& M, const MetricSchedule& schedule = {},
                           TimeScheme scheme = TimeScheme::backward_euler, const StepObserver& observer = {}) {
  if (!(dt > 0.0)) throw Error(Errc::invalid_spec, "dt must be positive");
  const double t0 = u0.t;
  if (t_end < t0) throw Error(Errc::invalid_spec, "t_end precedes the initial time");
  const auto steps = static_cast<std::size_t>(std::llround((t_end - t0) / dt));
  std::vector<std::size_t> wanted;
  for (double t : output_times) {
    if (t < t0 - 1e-12 || t > t_end + 1e-12) throw Error(Errc::invalid_spec, "output time outside [t0, t_end]");
    wanted.push_back(std::min<std::size_t>(steps, static_cast<std::size_t>(std::llround((t - t0) / dt))));
  }
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

  DensityTrace trace;
  std::size_t next = 0;
  auto record = [&](std::size_t k, const DensityField& u) {
    if (observer) observer(k, u);
    if (next < wanted.size() && wanted[next] == k) {
      trace.snapshots.push_back(u);
      trace.step_index.push_back(k);
      ++next;
    }
  };
  HeatStepper stepper(M, schedule, scheme);
  DensityField u = u0;
  record(0, u);
  for (std::size_t k = 1; k <= steps; ++k) {
    u = stepper.step(u, dt);
    u.t = t0 + static_cast<double>(k) * dt;
    record(k, u);
  }
  trace.max_mass_correction = stepper.max_mass_correction();
  return trace;
}

}  // namespace eplab
