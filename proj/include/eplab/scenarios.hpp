#pragma once

#include <string>
#include <utility>
#include <vector>

namespace eplab {

/// Built-in scenario catalog as (name, config text) pairs.
inline const std::vector<std::pair<std::string, std::string>>& builtin_scenarios() {
  static const std::vector<std::pair<std::string, std::string>> catalog = {
      {"euclidean-gaussian-1d", R"(# Heat kernel on a long reflecting interval, compared with the Euclidean Gaussian.
scenario = euclidean-gaussian-1d
grid.kind = interval
grid.resolution = 1200
grid.extent = 12
grid.weight = zero
flow.type = heat
flow.t0 = 0.02
flow.t_end = 0.5
flow.dt = 0.0002
flow.outputs = 25
flow.K = 0
flow.m = 1
flow.init = kernel
flow.oracle = gaussian
checks = step, entropy, fisher_information, entropy_power, w_entropy, edi_residual, epci_residual, niw_residual, niw_residual_K, gamma2_integral, nn1_decomposition, li_yau_margin, hamilton_margin, initial_slope_check, bochner_residual, entropy_gap, isoperimetric_product, avr_kappa, stam_lsi_slack
study.levels = 3
)"},
      {"circle-epci", R"(# Flat circle of circumference 2 pi from a small-time kernel.
scenario = circle-epci
grid.kind = circle
grid.resolution = 256
grid.extent = 6.283185307179586
grid.weight = zero
flow.type = heat
flow.t0 = 0.02
flow.t_end = 2.02
flow.dt = 0.001
flow.outputs = 21
flow.K = 0
flow.m = 1
flow.init = kernel
checks = step, entropy, fisher_information, entropy_power, w_entropy, edi_residual, epci_residual, niw_residual, gamma2_integral, li_yau_margin, hamilton_margin, initial_slope_check, bochner_residual
study.levels = 3
study.residuals = niw_residual, fisher_information, gamma2_integral, bochner_residual
)"},
      {"sphere-epci", R"(# Unit sphere (radial grid), CD(1, 2), kernel at the north pole.
scenario = sphere-epci
grid.kind = radial_surface
grid.profile = sphere
grid.resolution = 800
grid.weight = zero
flow.type = heat
flow.t0 = 0.01
flow.t_end = 1.01
flow.dt = 0.0005
flow.outputs = 21
flow.K = 1
flow.m = 2
flow.init = kernel
checks = step, entropy, fisher_information, entropy_power, edi_residual, epci_residual, niw_residual_K, gamma2_integral, li_yau_margin, initial_slope_check, bochner_residual, isoperimetric_product
study.levels = 3
study.residuals = niw_residual_K, fisher_information, gamma2_integral, bochner_residual
)"},
      {"weighted-interval-cdkm", R"(# Interval [-2, 2] with phi = a x^2 / 2, a = 0.25, m = 2: Ric_{2,1}(L) = a - a^2 x^2 >= 0.
scenario = weighted-interval-cdkm
grid.kind = interval
grid.resolution = 400
grid.extent = 4
grid.weight = quadratic
grid.weight_a = 0.25
flow.type = heat
flow.t0 = 0.02
flow.t_end = 0.52
flow.dt = 0.0005
flow.outputs = 21
flow.K = 0
flow.m = 2
flow.init = kernel
checks = step, entropy, fisher_information, entropy_power, w_entropy, edi_residual, epci_residual, niw_residual, gamma2_integral, nn1_decomposition, li_yau_margin, bochner_residual
study.levels = 3
study.residuals = bochner_residual, niw_residual, fisher_information, gamma2_integral
)"},
      {"super-rf-torus", R"(# Flat torus under g(t) = exp(2 K t) g0 with the measure-preserving potential rule.
scenario = super-rf-torus
grid.kind = torus2d
grid.resolution = 48
grid.extent = 6.283185307179586
grid.weight = zero
flow.type = heat
flow.t0 = 0.04
flow.t_end = 1.04
flow.dt = 0.001
flow.outputs = 21
flow.schedule = exponential
flow.K = 0.1
flow.m = 2
flow.init = kernel
checks = step, entropy, fisher_information, entropy_power, edi_residual, epci_residual, niw_residual_K, isoperimetric_product
study.levels = 2
study.residuals = fisher_information, niw_residual_K
)"},
      {"ricci-torus-bump", R"(# Ricci flow of w0 = A (cos x + cos y) on the torus with a conjugate heat kernel.
scenario = ricci-torus-bump
grid.kind = torus2d
grid.resolution = 64
grid.extent = 6.283185307179586
grid.conformal_amplitude = 0.2
flow.type = ricci
flow.t_end = 0.5
flow.dt = 0.005
flow.tau0 = 0.1
flow.outputs = 21
flow.init = kernel
checks = ricci_step, conjugate_heat_step, perelman_f, perelman_w, soliton_residual, nfw_residual
study.levels = 2
study.residuals = nfw_residual
)"},
      {"ricci-round-sphere", R"(# Round unit sphere shrinking to a point at t = 1/2, uniform conjugate density.
scenario = ricci-round-sphere
grid.kind = radial_surface
grid.profile = sphere
grid.resolution = 200
flow.type = ricci
flow.t_end = 0.4
flow.dt = 0.005
flow.outputs = 21
flow.init = uniform
flow.oracle = round_sphere
checks = ricci_step, conjugate_heat_step, perelman_f, perelman_w, soliton_residual, nfw_residual
study.levels = 2
study.residuals = nfw_residual
)"},
      {"cone-kappa", R"(# Flat cone psi(r) = beta r, beta = 0.5, kernel at the apex.
scenario = cone-kappa
grid.kind = radial_surface
grid.profile = cone
grid.beta = 0.5
grid.resolution = 800
grid.extent = 16
flow.type = heat
flow.t0 = 0.02
flow.t_end = 1.02
flow.dt = 0.001
flow.outputs = 21
flow.K = 0
flow.m = 2
flow.init = kernel
flow.oracle = gaussian
checks = step, entropy, fisher_information, entropy_power, edi_residual, epci_residual, entropy_gap, isoperimetric_product, avr_kappa, stam_lsi_slack
checks.entropy_gap.tolerance = 0.1
)"},
      {"euclidean-plane-gap", R"(# Euclidean plane (radial grid), kernel at the origin.
scenario = euclidean-plane-gap
grid.kind = radial_surface
grid.profile = plane
grid.resolution = 800
grid.extent = 16
flow.type = heat
flow.t0 = 0.02
flow.t_end = 1.02
flow.dt = 0.001
flow.outputs = 21
flow.K = 0
flow.m = 2
flow.init = kernel
flow.oracle = gaussian
checks = step, entropy, fisher_information, entropy_power, edi_residual, epci_residual, entropy_gap, isoperimetric_product, avr_kappa, stam_lsi_slack
checks.entropy_gap.tolerance = 0.05
)"},
  };
  return catalog;
}

inline const std::string* builtin_scenario_text(const std::string& name) {
  for (const auto& [n, text] : builtin_scenarios())
    if (n == name) return &text;
  return nullptr;
}

}  // namespace eplab
