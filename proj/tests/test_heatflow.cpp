#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eplab/heatflow.hpp"

using namespace eplab;

namespace {

constexpr double kPi = std::numbers::pi;

GridSpec circle(int n) {
  GridSpec s;
  s.kind = GridKind::circle;
  s.resolution = n;
  s.extent = 2.0 * kPi;
  return s;
}

GridSpec line(int n, double L) {
  GridSpec s;
  s.kind = GridKind::interval;
  s.boundary = Boundary::reflecting;
  s.resolution = n;
  s.extent = L;
  return s;
}

// Heat kernel on the circle of circumference 2 pi, 20 images each side.
double wrapped_gaussian(double x, double t) {
  double s = 0.0;
  for (int k = -20; k <= 20; ++k) {
    const double d = x + 2.0 * kPi * k;
    s += std::exp(-d * d / (4.0 * t));
  }
  return s / std::sqrt(4.0 * kPi * t);
}

double circle_error(int n, double dt) {
  const auto M = build_manifold(circle(n));
  const std::size_t c = default_center(M);
  const double t0 = 0.05, t1 = 0.25;
  Field v(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) v[i] = wrapped_gaussian(M.x[i] - M.x[c], t0);
  const DensityField u0 = normalized(M, v, t0);
  const auto tr = evolve(u0, t1, dt, {t1}, M);
  double err = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i)
    err = std::max(err, std::abs(tr.snapshots.back().values[i] - wrapped_gaussian(M.x[i] - M.x[c], t1)));
  return err;
}

}  // namespace

TEST(HeatKernelInit, CircleIsNormalisedAndPeaked) {
  const auto M = build_manifold(circle(256));
  const double h = 2.0 * kPi / 256;
  const double t0 = 25.0 * h * h / 4.0;  // sqrt(4 t0) = 5 h
  const std::size_t c = default_center(M);
  const auto u = heat_kernel_init(M, c, t0);
  EXPECT_NEAR(integrate(M, u.values), 1.0, 1e-12);
  for (std::size_t i = 0; i < M.size(); ++i) EXPECT_LE(u.values[i], u.values[c]);
}

TEST(HeatKernelInit, MatchesEuclideanGaussian) {
  const auto M = build_manifold(line(2000, 4.0));
  const double t0 = 0.01;
  const std::size_t c = default_center(M);
  const auto u = heat_kernel_init(M, c, t0);
  const double peak = 1.0 / std::sqrt(4.0 * kPi * t0);
  double err = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    const double d = M.x[i] - M.x[c];
    err = std::max(err, std::abs(u.values[i] - peak * std::exp(-d * d / (4.0 * t0))));
  }
  EXPECT_LE(err, 0.005 * peak);
}

TEST(HeatKernelInit, SphereDecreasesAwayFromPole) {
  GridSpec s;
  s.kind = GridKind::radial_surface;
  s.profile.id = "sphere";
  s.extent = kPi;
  s.resolution = 200;
  const auto M = build_manifold(s);
  const auto u = heat_kernel_init(M, default_center(M), 0.02);
  for (std::size_t i = 1; i < M.size(); ++i) EXPECT_LE(u.values[i], u.values[i - 1]);
}

TEST(HeatKernelInit, RejectsUnresolvedAndWideKernels) {
  const auto M = build_manifold(circle(64));
  try {
    (void)heat_kernel_init(M, 0, 1e-5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unresolved_kernel);
  }
  try {
    (void)heat_kernel_init(M, 0, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::domain_too_small);
  }
}

TEST(Step, UniformIsStationary) {
  const auto M = build_manifold(circle(128));
  const auto u = uniform_density(M, 0.0);
  const auto v = step(u, 0.01, M);
  for (std::size_t i = 0; i < M.size(); ++i) EXPECT_NEAR(v.values[i], u.values[i], 1e-12);
}

TEST(Step, FourierModeDecay) {
  // Backward Euler on cos: factor 1 / (1 + dt lambda_h), lambda_h = (2/h sin(h/2))^2 = 1 + O(h^2).
  const int n = 256;
  const auto M = build_manifold(circle(n));
  const auto u = cosine_density(M, 1.0, 0.0);
  const double dt = 0.01;
  const auto v = step(u, dt, M);
  const double h = 2.0 * kPi / n;
  const double mean = 1.0 / (2.0 * kPi);
  double worst = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    const double expect = mean * (1.0 + std::cos(M.x[i]) / (1.0 + dt));
    worst = std::max(worst, std::abs(v.values[i] - expect));
  }
  EXPECT_LE(worst, mean * dt * h * h);
}

TEST(Step, ConservesMass) {
  GridSpec s = line(300, 6.0);
  s.weight = {"quadratic", 1.0};
  s.m = 2.0;
  const auto M = build_manifold(s);
  auto u = heat_kernel_init(M, 100, 0.05);
  for (int k = 0; k < 20; ++k) {
    u = step(u, 0.005, M);
    EXPECT_NEAR(integrate(M, u.values), 1.0, 1e-10);
  }
}

TEST(Step, RejectsNonPositiveDt) {
  const auto M = build_manifold(circle(32));
  EXPECT_THROW((void)step(uniform_density(M, 0.0), 0.0, M), Error);
}

TEST(Evolve, ZeroLengthRunKeepsInitialField) {
  const auto M = build_manifold(circle(64));
  const auto u0 = cosine_density(M, 0.3, 0.1);
  const auto tr = evolve(u0, 0.1, 0.01, {0.1}, M);
  ASSERT_EQ(tr.snapshots.size(), 1u);
  EXPECT_EQ(tr.snapshots[0].values, u0.values);
}

TEST(Evolve, GaussianVarianceLaw) {
  const auto M = build_manifold(line(1200, 12.0));
  const std::size_t c = default_center(M);
  const auto u0 = heat_kernel_init(M, c, 0.02);
  const std::vector<double> times = {0.05, 0.1, 0.2, 0.3, 0.5};
  const auto tr = evolve(u0, 0.5, 2e-4, times, M);
  ASSERT_EQ(tr.snapshots.size(), times.size());
  for (const auto& u : tr.snapshots) {
    double var = 0.0;
    for (std::size_t i = 0; i < M.size(); ++i) {
      const double d = M.x[i] - M.x[c];
      var += d * d * u.values[i] * M.measure[i];
    }
    EXPECT_NEAR(var, 2.0 * u.t, 0.01 * 2.0 * u.t) << "t = " << u.t;
  }
}

TEST(Evolve, ExponentialScheduleKeepsMeasure) {
  GridSpec s;
  s.kind = GridKind::torus2d;
  s.resolution = 24;
  s.extent = 2.0 * kPi;
  const auto M = build_manifold(s);
  MetricSchedule sched{ScheduleKind::exponential, 0.1};
  double worst_drift = 0.0, worst_mass = 0.0;
  auto obs = [&](std::size_t, const DensityField& u) {
    const auto Mt = manifold_at(M, sched, u.t);
    worst_drift = std::max(worst_drift, std::abs(Mt.total_measure() - M.total_measure()) / M.total_measure());
    worst_drift = std::max(worst_drift, measure_drift(M, sched, u.t));
    worst_mass = std::max(worst_mass, std::abs(integrate(Mt, u.values) - 1.0));
  };
  (void)evolve(cosine_density(M, 0.5, 0.0), 1.0, 0.01, {1.0}, M, sched, TimeScheme::backward_euler, obs);
  EXPECT_LE(worst_drift, 1e-10);
  EXPECT_LE(worst_mass, 1e-10);
}

TEST(Evolve, ExponentialScheduleSlowsDiffusion) {
  // du/dt = e^{-2Kt} L u: the cosine mode decays like exp(-(1 - e^{-2Kt}) / 2K).
  const auto M = build_manifold(circle(256));
  const double K = 0.5, T = 1.0;
  MetricSchedule sched{ScheduleKind::exponential, K};
  const auto tr = evolve(cosine_density(M, 1.0, 0.0), T, 1e-4, {T}, M, sched);
  const double amp = std::exp(-(1.0 - std::exp(-2.0 * K * T)) / (2.0 * K));
  const double mean = 1.0 / (2.0 * kPi);
  EXPECT_NEAR((tr.snapshots[0].values[0] - mean) / mean, amp, 1e-3);
}

TEST(Evolve, WrappedGaussianConvergence) {
  // Time error first order with h fixed fine; space error second order with dt fixed fine.
  const double e1 = circle_error(512, 4e-3), e2 = circle_error(512, 2e-3);
  EXPECT_GE(std::log2(e1 / e2), 0.9);
  const double s1 = circle_error(32, 1e-5), s2 = circle_error(64, 1e-5);
  EXPECT_GE(std::log2(s1 / s2), 1.8);
  EXPECT_LE(circle_error(256, 1e-3), 5.0 * (1e-3 + std::pow(2.0 * kPi / 256, 2)));
}

TEST(Evolve, CrankNicolsonIsSecondOrderInTime) {
  auto err = [](double dt) {
    const auto M = build_manifold(circle(128));
    const auto tr = evolve(cosine_density(M, 1.0, 0.0), 0.5, dt, {0.5}, M, {}, TimeScheme::crank_nicolson);
    const double h = 2.0 * kPi / 128;
    const double lam = std::pow(2.0 / h * std::sin(h / 2.0), 2);
    const double mean = 1.0 / (2.0 * kPi);
    return std::abs((tr.snapshots[0].values[0] - mean) / mean - std::exp(-lam * 0.5));
  };
  EXPECT_GE(std::log2(err(0.02) / err(0.01)), 1.8);
}

TEST(Schedule, RejectsNonPositiveScale) {
  MetricSchedule s{ScheduleKind::linear_shrink, 0.0};
  EXPECT_THROW(s.validate_over(0.0, 0.6), Error);
}
