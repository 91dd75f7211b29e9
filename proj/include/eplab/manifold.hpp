#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eplab/catalog.hpp"
#include "eplab/error.hpp"
#include "eplab/grid_spec.hpp"

namespace eplab {

using Field = std::vector<double>;

/// Symmetric conductance graph in CSR layout. Row i lists the neighbours j of
/// vertex i together with the edge conductance c_ij = c_ji > 0.
struct Graph {
  std::vector<int> offsets;
  std::vector<int> neighbors;
  std::vector<double> conductance;

  std::size_t vertex_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }

  static Graph from_edges(std::size_t n, const std::vector<std::pair<int, int>>& edges,
                          const std::vector<double>& c) {
    Graph g;
    std::vector<int> degree(n, 0);
    for (const auto& [a, b] : edges) {
      ++degree[a];
      ++degree[b];
    }
    g.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + degree[i];
    g.neighbors.resize(g.offsets[n]);
    g.conductance.resize(g.offsets[n]);
    std::vector<int> fill(g.offsets.begin(), g.offsets.end() - 1);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [a, b] = edges[e];
      g.neighbors[fill[a]] = b;
      g.conductance[fill[a]++] = c[e];
      g.neighbors[fill[b]] = a;
      g.conductance[fill[b]++] = c[e];
    }
    return g;
  }
};

/// A discrete weighted Riemannian space. Values are per vertex; the Witten
/// Laplacian is (L u)_i = (1/mu_i) sum_j c_ij (u_j - u_i), which is symmetric
/// in the mu-weighted inner product by construction.
///
/// Coordinates: circle uses arc length s in [0, L); interval uses cell centres
/// in (-L/2, L/2); torus2d uses (x, y) on the periodic square; radial_surface
/// uses the distance r from the pole at cell centres; icosphere stores unit
/// vectors (x, y, z).
struct WeightedManifold {
  GridSpec spec;
  int n = 1;
  double m = 1.0;
  double K = 0.0;

  int nx = 0;
  int ny = 1;
  double hx = 0.0;
  double hy = 0.0;

  std::vector<double> x, y, z;
  Field volume;
  Field phi;
  Field measure;
  Field conformal;            // torus2d conformal factor w, g = e^{2w} g0
  double metric_scale = 1.0;  // g = metric_scale * g_base
  Graph graph;
  std::vector<std::array<int, 3>> faces;  // icosphere only

  std::size_t size() const { return measure.size(); }
  bool structured() const { return spec.kind != GridKind::icosphere; }
  bool closed() const {
    return spec.kind == GridKind::circle || spec.kind == GridKind::torus2d ||
           spec.kind == GridKind::icosphere ||
           (spec.kind == GridKind::radial_surface && spec.profile.id == "sphere");
  }
  bool weighted() const { return !is_zero_weight(spec.weight); }

  double total_measure() const {
    double s = 0.0;
    for (double v : measure) s += v;
    return s;
  }

  /// Mesh spacing used in tolerance and resolution checks (geodesic units).
  double spacing() const {
    const double s = std::sqrt(metric_scale);
    if (spec.kind == GridKind::torus2d) {
      const double wmax = conformal.empty() ? 0.0 : *std::max_element(conformal.begin(), conformal.end());
      return s * std::max(hx, hy) * std::exp(wmax);
    }
    if (spec.kind == GridKind::icosphere) return s * std::sqrt(4.0 * std::numbers::pi / size());
    return s * hx;
  }

  /// Half the injectivity radius scale used to gate small-time kernels.
  double injectivity_scale() const {
    const double s = std::sqrt(metric_scale);
    switch (spec.kind) {
      case GridKind::circle: return s * spec.extent / 2.0;
      case GridKind::interval: return s * spec.extent / 2.0;
      case GridKind::torus2d: return s * std::min(spec.extent, spec.ly()) / 2.0;
      case GridKind::radial_surface: return s * spec.extent;
      case GridKind::icosphere: return s * std::numbers::pi;
    }
    return 0.0;
  }

  /// Geodesic distance between two vertices (closed form per kind).
  /// For radial_surface only distances from the pole are available; `from` is ignored.
  double distance(std::size_t from, std::size_t to) const {
    const double s = std::sqrt(metric_scale);
    switch (spec.kind) {
      case GridKind::circle: {
        const double d = std::abs(x[to] - x[from]);
        return s * std::min(d, spec.extent - d);
      }
      case GridKind::interval: return s * std::abs(x[to] - x[from]);
      case GridKind::torus2d: {
        double dx = std::abs(x[to] - x[from]);
        double dy = std::abs(y[to] - y[from]);
        dx = std::min(dx, spec.extent - dx);
        dy = std::min(dy, spec.ly() - dy);
        const double w = conformal.empty() ? 0.0 : conformal[from];
        return s * std::exp(w) * std::hypot(dx, dy);
      }
      case GridKind::radial_surface: return s * x[to];
      case GridKind::icosphere: {
        double c = x[to] * x[from] + y[to] * y[from] + z[to] * z[from];
        c = std::clamp(c, -1.0, 1.0);
        return s * std::acos(c);
      }
    }
    return 0.0;
  }
};

namespace detail {

inline void finish_measure(WeightedManifold& M) {
  M.measure.resize(M.volume.size());
  for (std::size_t i = 0; i < M.volume.size(); ++i) M.measure[i] = std::exp(-M.phi[i]) * M.volume[i];
}

inline void build_circle(WeightedManifold& M) {
  const auto& s = M.spec;
  const int N = s.resolution;
  const double L = s.extent;
  const double h = L / N;
  M.nx = N;
  M.hx = h;
  M.x.resize(N);
  M.volume.assign(N, h);
  M.phi.resize(N);
  std::vector<std::pair<int, int>> edges;
  std::vector<double> c;
  for (int i = 0; i < N; ++i) {
    M.x[i] = i * h;
    M.phi[i] = weight_jet(s.weight, M.x[i], L).value;
    const double mid = weight_jet(s.weight, (i + 0.5) * h, L).value;
    edges.emplace_back(i, (i + 1) % N);
    c.push_back(std::exp(-mid) / h);
  }
  M.graph = Graph::from_edges(N, edges, c);
}

inline void build_interval(WeightedManifold& M) {
  const auto& s = M.spec;
  const int N = s.resolution;
  const double L = s.extent;
  const double h = L / N;
  M.nx = N;
  M.hx = h;
  M.x.resize(N);
  M.volume.assign(N, h);
  M.phi.resize(N);
  std::vector<std::pair<int, int>> edges;
  std::vector<double> c;
  for (int i = 0; i < N; ++i) {
    M.x[i] = -0.5 * L + (i + 0.5) * h;
    M.phi[i] = weight_jet(s.weight, M.x[i]).value;
    if (i + 1 < N) {
      const double mid = weight_jet(s.weight, -0.5 * L + (i + 1) * h).value;
      edges.emplace_back(i, i + 1);
      c.push_back(std::exp(-mid) / h);
    }
  }
  M.graph = Graph::from_edges(N, edges, c);
}

inline void build_torus(WeightedManifold& M, const Field* w_field) {
  const auto& s = M.spec;
  const int Nx = s.resolution, Ny = s.ny();
  const double hx = s.extent / Nx, hy = s.ly() / Ny;
  M.nx = Nx;
  M.ny = Ny;
  M.hx = hx;
  M.hy = hy;
  const std::size_t n = static_cast<std::size_t>(Nx) * Ny;
  M.x.resize(n);
  M.y.resize(n);
  M.conformal.resize(n);
  M.volume.resize(n);
  M.phi.assign(n, 0.0);
  std::vector<std::pair<int, int>> edges;
  std::vector<double> c;
  edges.reserve(2 * n);
  c.reserve(2 * n);
  for (int j = 0; j < Ny; ++j) {
    for (int i = 0; i < Nx; ++i) {
      const int k = j * Nx + i;
      M.x[k] = i * hx;
      M.y[k] = j * hy;
      const double kx = 2.0 * std::numbers::pi / s.extent, ky = 2.0 * std::numbers::pi / s.ly();
      M.conformal[k] = w_field ? (*w_field)[k]
                               : s.conformal_amplitude * (std::cos(kx * M.x[k]) + std::cos(ky * M.y[k]));
      M.volume[k] = std::exp(2.0 * M.conformal[k]) * hx * hy;
      // Conformal invariance of the 2D Dirichlet energy: conductances ignore w.
      edges.emplace_back(k, j * Nx + (i + 1) % Nx);
      c.push_back(hy / hx);
      edges.emplace_back(k, ((j + 1) % Ny) * Nx + i);
      c.push_back(hx / hy);
    }
  }
  M.graph = Graph::from_edges(n, edges, c);
}

inline void build_radial(WeightedManifold& M) {
  const auto& s = M.spec;
  const int N = s.resolution;
  const double h = s.extent / N;
  M.nx = N;
  M.hx = h;
  M.x.resize(N);
  M.volume.resize(N);
  M.phi.resize(N);
  std::vector<std::pair<int, int>> edges;
  std::vector<double> c;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < N; ++i) {
    const double r = (i + 0.5) * h;
    M.x[i] = r;
    M.volume[i] = two_pi * (profile_area(s.profile, (i + 1) * h) - profile_area(s.profile, i * h));
    M.phi[i] = weight_jet(s.weight, r).value;
    if (i + 1 < N) {
      const double rf = (i + 1) * h;
      edges.emplace_back(i, i + 1);
      c.push_back(two_pi * profile_jet(s.profile, rf).value * std::exp(-weight_jet(s.weight, rf).value) / h);
    }
  }
  M.graph = Graph::from_edges(N, edges, c);
}

struct V3 {
  double x, y, z;
};
inline V3 operator-(V3 a, V3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline double dot(V3 a, V3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline V3 cross(V3 a, V3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
inline double norm(V3 a) { return std::sqrt(dot(a, a)); }
inline V3 normalized(V3 a) {
  const double l = norm(a);
  return {a.x / l, a.y / l, a.z / l};
}

inline void build_icosphere(WeightedManifold& M) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<V3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v = normalized(v);
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < M.spec.resolution; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      const V3 p = normalized({(verts[a].x + verts[b].x) / 2, (verts[a].y + verts[b].y) / 2,
                               (verts[a].z + verts[b].z) / 2});
      verts.push_back(p);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }

  const std::size_t n = verts.size();
  M.x.resize(n);
  M.y.resize(n);
  M.z.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    M.x[i] = verts[i].x;
    M.y[i] = verts[i].y;
    M.z[i] = verts[i].z;
  }
  M.volume.assign(n, 0.0);
  M.phi.assign(n, 0.0);
  std::map<std::pair<int, int>, double> cot;
  for (const auto& f : faces) {
    const V3 a = verts[f[0]], b = verts[f[1]], c = verts[f[2]];
    // Spherical excess (Van Oosterom-Strackee), so vertex areas sum to 4 pi.
    const double num = std::abs(dot(a, cross(b, c)));
    const double den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    const double area = 2.0 * std::atan2(num, den);
    for (int k = 0; k < 3; ++k) M.volume[f[k]] += area / 3.0;
    for (int k = 0; k < 3; ++k) {
      const int i = f[k], j = f[(k + 1) % 3], o = f[(k + 2) % 3];
      const V3 e1 = verts[i] - verts[o], e2 = verts[j] - verts[o];
      const double ct = dot(e1, e2) / norm(cross(e1, e2));
      cot[std::minmax(i, j)] += 0.5 * ct;
    }
  }
  std::vector<std::pair<int, int>> edges;
  std::vector<double> c;
  for (const auto& [key, w] : cot) {
    if (!(w > 0.0)) throw Error(Errc::unsupported_spec, "icosphere produced a non-positive cotangent weight");
    edges.push_back(key);
    c.push_back(w);
  }
  M.faces = std::move(faces);
  M.graph = Graph::from_edges(n, edges, c);
}

}  // namespace detail

/// Sum of field_i * mu_i.
inline double integrate(const WeightedManifold& M, std::span<const double> field) {
  double s = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!std::isfinite(field[i])) throw Error(Errc::non_finite_field, "integrand is not finite");
    s += field[i] * M.measure[i];
  }
  return s;
}

/// (L u)_i = (1/mu_i) sum_j c_ij (u_j - u_i).
inline Field apply_laplacian(const WeightedManifold& M, std::span<const double> u) {
  const auto& g = M.graph;
  Field out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    double acc = 0.0;
    for (int e = g.offsets[i]; e < g.offsets[i + 1]; ++e) acc += g.conductance[e] * (u[g.neighbors[e]] - u[i]);
    out[i] = acc / M.measure[i];
  }
  return out;
}

/// Carre du champ Gamma(u, w)_i = (1/(2 mu_i)) sum_j c_ij (u_j - u_i)(w_j - w_i).
inline Field carre_du_champ(const WeightedManifold& M, std::span<const double> u, std::span<const double> w) {
  const auto& g = M.graph;
  Field out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    double acc = 0.0;
    for (int e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const int j = g.neighbors[e];
      acc += g.conductance[e] * (u[j] - u[i]) * (w[j] - w[i]);
    }
    out[i] = 0.5 * acc / M.measure[i];
  }
  return out;
}

/// Witten Laplacian L = Delta - grad(phi).grad as a view over a manifold. The
/// manifold must outlive the operator.
class DiscreteOperator {
 public:
  explicit DiscreteOperator(const WeightedManifold& M) : m_(&M) {}

  Field apply(std::span<const double> u) const { return apply_laplacian(*m_, u); }
  Field gamma(std::span<const double> u) const { return carre_du_champ(*m_, u, u); }
  Field gamma(std::span<const double> u, std::span<const double> w) const { return carre_du_champ(*m_, u, w); }
  const WeightedManifold& manifold() const { return *m_; }

 private:
  const WeightedManifold* m_;
};

inline DiscreteOperator witten_laplacian(const WeightedManifold& M) { return DiscreteOperator(M); }

struct InvariantReport {
  double symmetry = 0.0;        // |<Lu,w> - <u,Lw>| / scale
  double constant_kernel = 0.0; // max |L 1|
  double integration_by_parts = 0.0;
  double min_gamma = 0.0;
};

/// Randomised check of operator symmetry, zero row sums, Gamma positivity and
/// discrete integration by parts. Deterministic (fixed seed).
inline InvariantReport check_operator_invariants(const WeightedManifold& M, int trials = 3) {
  InvariantReport rep;
  std::mt19937_64 rng(0x5eed1234ULL);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const std::size_t n = M.size();
  Field ones(n, 1.0);
  const Field l1 = apply_laplacian(M, ones);
  for (double v : l1) rep.constant_kernel = std::max(rep.constant_kernel, std::abs(v));
  for (int t = 0; t < trials; ++t) {
    Field u(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = dist(rng);
      w[i] = dist(rng);
    }
    const Field lu = apply_laplacian(M, u), lw = apply_laplacian(M, w);
    double a = 0.0, b = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      a += lu[i] * w[i] * M.measure[i];
      b += u[i] * lw[i] * M.measure[i];
      scale += std::abs(lu[i] * w[i] * M.measure[i]) + std::abs(u[i] * lw[i] * M.measure[i]);
    }
    rep.symmetry = std::max(rep.symmetry, std::abs(a - b) / std::max(scale, 1e-300));
    const Field gam = carre_du_champ(M, u, w);
    const Field gu = carre_du_champ(M, u, u);
    double ibp = 0.0, ibp_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ibp += (gam[i] + u[i] * lw[i]) * M.measure[i];
      ibp_scale += (std::abs(gam[i]) + std::abs(u[i] * lw[i])) * M.measure[i];
      rep.min_gamma = std::min(rep.min_gamma, gu[i]);
    }
    rep.integration_by_parts = std::max(rep.integration_by_parts, std::abs(ibp) / std::max(ibp_scale, 1e-300));
  }
  return rep;
}

namespace detail {
inline void assert_invariants(const WeightedManifold& M) {
  // Skip the O(n) random probe for huge meshes only in the sense of fewer trials.
  const InvariantReport rep = check_operator_invariants(M, 1);
  if (rep.symmetry > 1e-10 || rep.integration_by_parts > 1e-10 || rep.min_gamma < 0.0)
    throw Error(Errc::invalid_spec, "assembled operator violates symmetry or integration by parts");
  if (M.closed() && rep.constant_kernel > 1e-12)
    throw Error(Errc::invalid_spec, "operator does not annihilate constants");
}
}  // namespace detail

/// Builds the discrete weighted manifold described by `spec`. Deterministic.
inline WeightedManifold build_manifold(const GridSpec& spec) {
  validate(spec);
  WeightedManifold M;
  M.spec = spec;
  M.n = spec.dimension();
  M.m = spec.effective_m();
  M.K = spec.K;
  switch (spec.kind) {
    case GridKind::circle: detail::build_circle(M); break;
    case GridKind::interval: detail::build_interval(M); break;
    case GridKind::torus2d: detail::build_torus(M, nullptr); break;
    case GridKind::radial_surface: detail::build_radial(M); break;
    case GridKind::icosphere: detail::build_icosphere(M); break;
  }
  detail::finish_measure(M);
  detail::assert_invariants(M);
  return M;
}

/// Torus with an explicit conformal factor field (used by the Ricci flow backend).
inline WeightedManifold build_conformal_torus(const GridSpec& spec, const Field& w) {
  GridSpec s = spec;
  s.kind = GridKind::torus2d;
  validate(s);
  if (w.size() != static_cast<std::size_t>(s.resolution) * s.ny())
    throw Error(Errc::invalid_spec, "conformal field size does not match the grid");
  WeightedManifold M;
  M.spec = s;
  M.n = 2;
  M.m = s.effective_m();
  M.K = s.K;
  detail::build_torus(M, &w);
  detail::finish_measure(M);
  return M;
}

enum class Rescaling {
  measure_preserving,  // potential rule d(phi)/dt = Tr(dg/dt)/2 keeps mu fixed
  plain,               // mu scales with the Riemannian volume c^{n/2}
};

/// Copy of `M` with metric c * g. Conductances follow the induced Laplacian.
inline WeightedManifold rescaled(const WeightedManifold& M, double c, Rescaling mode) {
  WeightedManifold out = M;
  const double ratio = c / M.metric_scale;
  out.metric_scale = c;
  const double half_n = 0.5 * M.n;
  if (mode == Rescaling::measure_preserving) {
    for (auto& w : out.graph.conductance) w /= ratio;
    const double shift = half_n * std::log(ratio);
    for (auto& p : out.phi) p += shift;
    for (auto& v : out.volume) v *= std::pow(ratio, half_n);
  } else {
    const double vf = std::pow(ratio, half_n);
    for (auto& w : out.graph.conductance) w *= vf / ratio;
    for (auto& v : out.volume) v *= vf;
    for (auto& mu : out.measure) mu *= vf;
  }
  return out;
}

}  // namespace eplab
