#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eplab/geometry.hpp"
#include "eplab/manifold.hpp"

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

GridSpec torus(int n) {
  GridSpec s;
  s.kind = GridKind::torus2d;
  s.resolution = n;
  s.extent = 2.0 * kPi;
  return s;
}

GridSpec ou_interval(int n, double a) {
  GridSpec s;
  s.kind = GridKind::interval;
  s.boundary = Boundary::reflecting;
  s.resolution = n;
  s.extent = 8.0;
  s.weight = {"quadratic", a};
  s.m = 2.0;
  return s;
}

GridSpec unit_sphere(int n) {
  GridSpec s;
  s.kind = GridKind::radial_surface;
  s.profile.id = "sphere";
  s.extent = kPi;
  s.resolution = n;
  return s;
}

double max_abs_diff(const Field& a, const Field& b, const std::vector<std::size_t>& idx) {
  double worst = 0.0;
  for (std::size_t i : idx) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST(BuildManifold, CircleHasUniformMeasure) {
  const auto M = build_manifold(circle(256));
  ASSERT_EQ(M.size(), 256u);
  for (double mu : M.measure) EXPECT_NEAR(mu, 2.0 * kPi / 256.0, 1e-14);
}

TEST(BuildManifold, FlatTorusArea) {
  const auto M = build_manifold(torus(64));
  EXPECT_NEAR(M.total_measure(), 4.0 * kPi * kPi, 1e-10);
}

TEST(BuildManifold, IcosphereArea) {
  GridSpec s;
  s.kind = GridKind::icosphere;
  s.resolution = 4;
  const auto M = build_manifold(s);
  EXPECT_NEAR(M.total_measure(), 4.0 * kPi, 1e-3 * 4.0 * kPi);
}

TEST(BuildManifold, RejectsCoarseGrid) {
  try {
    (void)build_manifold(circle(4));
    FAIL() << "expected ResolutionTooLow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::resolution_too_low);
  }
}

TEST(BuildManifold, RejectsWeightWhenMEqualsN) {
  GridSpec s = ou_interval(64, 1.0);
  s.m = 1.0;
  try {
    (void)build_manifold(s);
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(BuildManifold, RejectsUnknownWeight) {
  GridSpec s = circle(64);
  s.weight = {"sextic", 1.0};
  s.m = 3.0;
  EXPECT_THROW((void)build_manifold(s), Error);
}

TEST(WittenLaplacian, CircleEigenfunction) {
  // L sin = -sin; the second-order stencil error is h^2/12.
  for (int n : {64, 128}) {
    const auto M = build_manifold(circle(n));
    Field u(M.size()), expect(M.size());
    for (std::size_t i = 0; i < M.size(); ++i) {
      u[i] = std::sin(M.x[i]);
      expect[i] = -u[i];
    }
    const double h = 2.0 * kPi / n;
    std::vector<std::size_t> all(M.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    EXPECT_LE(max_abs_diff(apply_laplacian(M, u), expect, all), h * h / 12.0 * 1.01);
  }
}

TEST(WittenLaplacian, OrnsteinUhlenbeckDrift) {
  // phi = x^2/2: L x = -x away from the reflecting ends.
  const auto M = build_manifold(ou_interval(400, 1.0));
  Field u(M.x.begin(), M.x.end()), expect(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) expect[i] = -M.x[i];
  const double h = M.hx;
  EXPECT_LE(max_abs_diff(apply_laplacian(M, u), expect, interior_vertices(M)), 10.0 * h * h);
}

TEST(WittenLaplacian, SymmetricOnTorus) {
  const auto M = build_manifold(torus(32));
  const auto rep = check_operator_invariants(M, 4);
  EXPECT_LE(rep.symmetry, 1e-10);
  EXPECT_LE(rep.integration_by_parts, 1e-10);
  EXPECT_LE(rep.constant_kernel, 1e-12);
  EXPECT_GE(rep.min_gamma, 0.0);
}

TEST(WittenLaplacian, SymmetricOnIcosphereAndWeightedInterval) {
  GridSpec ico;
  ico.kind = GridKind::icosphere;
  ico.resolution = 3;
  for (const auto& spec : {ico, ou_interval(200, 0.5), unit_sphere(100)}) {
    const auto rep = check_operator_invariants(build_manifold(spec), 3);
    EXPECT_LE(rep.symmetry, 1e-10);
    EXPECT_LE(rep.integration_by_parts, 1e-10);
  }
}

TEST(Integrate, ConstantsAndDensities) {
  const auto C = build_manifold(circle(128));
  EXPECT_NEAR(integrate(C, Field(C.size(), 1.0)), 2.0 * kPi, 1e-12);

  GridSpec ico;
  ico.kind = GridKind::icosphere;
  ico.resolution = 4;
  const auto S = build_manifold(ico);
  EXPECT_NEAR(integrate(S, Field(S.size(), 1.0)), 4.0 * kPi, 1e-2);

  Field u(C.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = 1.0 + 0.5 * std::cos(C.x[i]);
  const double z = integrate(C, u);
  for (auto& v : u) v /= z;
  EXPECT_NEAR(integrate(C, u), 1.0, 1e-12);
}

TEST(Bochner, ConstantIsExactlyZero) {
  for (const auto& spec : {circle(64), torus(32), ou_interval(100, 1.0), unit_sphere(80)}) {
    const auto M = build_manifold(spec);
    EXPECT_EQ(bochner_residual(M, Field(M.size(), 3.0)), 0.0);
  }
}

TEST(Bochner, CircleConvergesUnderRefinement) {
  auto residual = [](int n) {
    const auto M = build_manifold(circle(n));
    Field u(M.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sin(M.x[i]);
    return bochner_residual(M, u);
  };
  const double r1 = residual(64), r2 = residual(128), r3 = residual(256);
  EXPECT_GE(std::log2(r1 / r2), 1.0);
  EXPECT_GE(std::log2(r2 / r3), 1.0);
}

TEST(Bochner, TorusWaveConverges) {
  auto residual = [](int n) {
    const auto M = build_manifold(torus(n));
    Field u(M.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sin(M.x[i] + 2.0 * M.y[i]);
    return bochner_residual(M, u);
  };
  const double h = 2.0 * kPi / 32;
  const double r1 = residual(32), r2 = residual(64);
  EXPECT_LE(r1, 50.0 * h);
  EXPECT_GE(std::log2(r1 / r2), 0.8);
}

TEST(Bochner, WeightedIntervalConverges) {
  auto residual = [](int n) {
    const auto M = build_manifold(ou_interval(n, 0.25));
    Field u(M.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::cos(M.x[i]);
    return bochner_residual(M, u);
  };
  EXPECT_GE(std::log2(residual(200) / residual(400)), 0.8);
}

TEST(Bochner, UnavailableOnIcosphere) {
  GridSpec ico;
  ico.kind = GridKind::icosphere;
  ico.resolution = 2;
  const auto M = build_manifold(ico);
  try {
    (void)bochner_residual(M, Field(M.size(), 1.0));
    FAIL() << "expected HessianUnavailable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::hessian_unavailable);
  }
}

TEST(RicciMn, UnitSphereIsOne) {
  const auto M = build_manifold(unit_sphere(100));
  std::vector<Vec2> X(M.size(), Vec2{1.0, 0.0});
  const Field r = ricci_mn_form(M, X);
  for (std::size_t i : interior_vertices(M)) EXPECT_NEAR(r[i], 1.0, 1e-12);
  std::vector<Vec2> Y(M.size(), Vec2{0.0, 1.0});
  const Field q = ricci_mn_form(M, Y);
  for (std::size_t i : interior_vertices(M)) EXPECT_NEAR(q[i], 1.0, 1e-12);
}

TEST(RicciMn, QuadraticWeightClosedForm) {
  // n = 1, m = 2, phi = a x^2 / 2: a - a^2 x^2.
  const double a = 0.25;
  const auto M = build_manifold(ou_interval(200, a));
  std::vector<Vec2> X(M.size(), Vec2{1.0, 0.0});
  const Field r = ricci_mn_form(M, X);
  for (std::size_t i = 0; i < M.size(); ++i) EXPECT_NEAR(r[i], a - a * a * M.x[i] * M.x[i], 1e-12);
}

TEST(RicciMn, FlatTorusIsZero) {
  const auto M = build_manifold(torus(16));
  std::vector<Vec2> X(M.size(), Vec2{0.6, 0.8});
  for (double v : ricci_mn_form(M, X)) EXPECT_EQ(v, 0.0);
}

TEST(Rescaling, MeasurePreservingKeepsMu) {
  const auto M = build_manifold(torus(16));
  const auto R = rescaled(M, 1.7, Rescaling::measure_preserving);
  for (std::size_t i = 0; i < M.size(); ++i) EXPECT_DOUBLE_EQ(R.measure[i], M.measure[i]);
  // L scales like 1/c.
  Field u(M.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::cos(M.x[i]);
  const Field a = apply_laplacian(M, u), b = apply_laplacian(R, u);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(b[i], a[i] / 1.7, 1e-12);
}

TEST(Rescaling, PlainScalesVolume) {
  const auto M = build_manifold(unit_sphere(60));
  const auto R = rescaled(M, 0.5, Rescaling::plain);
  EXPECT_NEAR(R.total_measure(), 0.5 * M.total_measure(), 1e-12);
}
