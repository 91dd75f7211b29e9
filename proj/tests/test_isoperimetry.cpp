#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "eplab/heatflow.hpp"
#include "eplab/isoperimetry.hpp"

using namespace eplab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kE = std::numbers::e;

GridSpec radial(const std::string& profile, double beta = 1.0) {
  GridSpec s;
  s.kind = GridKind::radial_surface;
  s.profile = {profile, beta};
  s.extent = 16.0;
  s.resolution = 400;
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

Field sqrt_gaussian(const WeightedManifold& M, double var, double shift = 0.0, double bump = 0.0) {
  Field f(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) {
    const double x = M.x[i] - shift;
    f[i] = std::exp(-x * x / (2.0 * var)) * (1.0 + bump * std::cos(3.0 * x));
  }
  Field f2(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f2[i] = f[i] * f[i];
  const double z = std::sqrt(integrate(M, f2));
  for (auto& v : f) v /= z;
  return f;
}

}  // namespace

TEST(AvrKappa, FlatAndConicalModels) {
  EXPECT_DOUBLE_EQ(avr_kappa(radial("plane")), 1.0);
  EXPECT_DOUBLE_EQ(avr_kappa(radial("cone", 0.5)), 0.5);
  EXPECT_DOUBLE_EQ(avr_kappa(line(100, 10.0)), 1.0);
}

TEST(AvrKappa, CompactModelsRejected) {
  GridSpec c;
  c.kind = GridKind::circle;
  try {
    (void)avr_kappa(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::compact_manifold);
  }
  GridSpec s = radial("sphere");
  s.extent = kPi;
  EXPECT_THROW((void)avr_kappa(s), Error);
}

TEST(Gamma, Constants) {
  EXPECT_DOUBLE_EQ(gamma_constant(1.0, 1.0), 2.0 * kPi * kE);
  EXPECT_DOUBLE_EQ(gamma_constant(2.0, 0.5), 2.0 * kPi * kE * 2.0 * 0.5);
  EXPECT_DOUBLE_EQ(gamma_constant_alt(2.0, 1.0), 2.0 * gamma_constant(2.0, 1.0));
}

TEST(EntropyGap, GaussianIsZero) {
  const auto M = build_manifold(line(1200, 12.0));
  std::vector<double> T, H, I;
  auto obs = [&](std::size_t, const DensityField& u) {
    T.push_back(u.t);
    H.push_back(entropy(M, u.values));
    I.push_back(fisher_information(M, u.values));
  };
  (void)evolve(heat_kernel_init(M, default_center(M), 0.02), 0.5, 2e-4, {0.5}, M, {}, TimeScheme::backward_euler, obs);
  const auto tr = build_entropy_trace(T, H, I, 1.0, 0.0);
  for (double g : entropy_gap(tr, 1.0)) EXPECT_NEAR(g, 0.0, 1e-3);
  // Q = N I = 2 pi e for the Gaussian
  for (double q : isoperimetric_product(tr)) EXPECT_NEAR(q / (2.0 * kPi * kE), 1.0, 0.005);
}

TEST(EntropyGap, ConeApproachesLogBeta) {
  const auto M = build_manifold(radial("cone", 0.5));
  std::vector<double> T, H, I;
  auto obs = [&](std::size_t, const DensityField& u) {
    T.push_back(u.t);
    H.push_back(entropy(M, u.values));
    I.push_back(fisher_information(M, u.values));
  };
  (void)evolve(heat_kernel_init(M, 0, 0.05), 1.0, 1e-3, {1.0}, M, {}, TimeScheme::backward_euler, obs);
  const auto tr = build_entropy_trace(T, H, I, 2.0, 0.0);
  const auto gap = entropy_gap(tr, 2.0);
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (std::sqrt(4.0 * tr.t[k]) <= 32.0 / 8.0) EXPECT_NEAR(gap[k], std::log(0.5), 0.1);
}

TEST(IsoperimetricProduct, UniformIsZero) {
  const auto tr = build_entropy_trace({0.1, 0.2, 0.3}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, 2.0, 0.0);
  for (double q : isoperimetric_product(tr)) EXPECT_EQ(q, 0.0);
}

TEST(Stam, GaussianIsExtremal) {
  const auto M = build_manifold(line(2000, 16.0));
  const double mid = M.x[default_center(M)];
  for (double var : {0.2, 0.5, 1.0}) {
    const Field f = sqrt_gaussian(M, var, mid);
    EXPECT_NEAR(stam_lsi_slack(M, f, gamma_constant(1.0, 1.0), 1.0), 0.0, 1e-4) << "var " << var;
  }
}

TEST(Stam, PerturbedGaussianHasSlack) {
  const auto M = build_manifold(line(2000, 16.0));
  const Field f = sqrt_gaussian(M, 0.5, M.x[default_center(M)], 0.3);
  EXPECT_GT(stam_lsi_slack(M, f, gamma_constant(1.0, 1.0), 1.0), 1e-3);
}

TEST(Stam, ZeroEnergySentinel) {
  GridSpec c;
  c.kind = GridKind::circle;
  c.resolution = 64;
  const auto M = build_manifold(c);
  const Field f(M.size(), 1.0 / std::sqrt(M.total_measure()));
  EXPECT_EQ(stam_lsi_slack(M, f, gamma_constant(1.0, 1.0), 1.0), std::numeric_limits<double>::infinity());
}

TEST(Stam, RejectsUnnormalised) {
  const auto M = build_manifold(line(100, 4.0));
  try {
    (void)stam_lsi_slack(M, Field(M.size(), 2.0), 1.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_normalized);
  }
}
