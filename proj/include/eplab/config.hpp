#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eplab/error.hpp"
#include "eplab/grid_spec.hpp"
#include "eplab/heatflow.hpp"
#include "eplab/isoperimetry.hpp"
#include "eplab/scenarios.hpp"

namespace eplab {

/// Every check the runner knows, in report order.
inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {
      "step",           "entropy",         "fisher_information", "entropy_power",      "w_entropy",
      "edi_residual",   "epci_residual",   "niw_residual",       "niw_residual_K",     "gamma2_integral",
      "nn1_decomposition", "li_yau_margin", "hamilton_margin",   "initial_slope_check", "bochner_residual",
      "ricci_step",     "conjugate_heat_step", "perelman_f",     "perelman_w",         "soliton_residual",
      "nfw_residual",   "entropy_gap",     "isoperimetric_product", "avr_kappa",      "stam_lsi_slack"};
  return names;
}

inline bool is_check_name(const std::string& s) {
  const auto& n = check_names();
  return std::find(n.begin(), n.end(), s) != n.end();
}

enum class FlowType { heat, ricci };

struct FlowSpec {
  FlowType type = FlowType::heat;
  double t0 = 0.0;
  double t_end = 0.0;
  double dt = 0.0;
  int outputs = 21;
  MetricSchedule schedule{};
  TimeScheme scheme = TimeScheme::backward_euler;
  std::string init = "kernel";  // kernel | uniform | cosine
  double init_amplitude = 0.5;
  double alpha = 1.0;
  double K_minus = 0.0;
  double tau0 = 0.0;           // ricci: conjugate time at the end of the forward flow
  std::string oracle = "none";  // none | gaussian | round_sphere
};

struct CheckSpec {
  std::string name;
  std::optional<double> tolerance;
};

struct OutputSpec {
  std::string dir;
  bool csv = true;
  bool json = true;
};

struct StudySpec {
  int levels = 3;
  bool refine_space = true;
  std::vector<std::string> residuals;  // empty: every applicable residual
};

struct ExperimentConfig {
  std::string scenario;
  GridSpec grid;
  FlowSpec flow;
  std::vector<CheckSpec> checks;
  OutputSpec output;
  StudySpec study;
  std::map<std::string, std::string> raw;  // effective key/value pairs

  const CheckSpec* check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void config_fail(const std::string& msg) { throw Error(Errc::config_error, msg); }

inline double to_double(const ConfigMap& m, const std::string& key) {
  const std::string& v = m.at(key);
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    config_fail(key + ": not a number: '" + v + "'");
  }
  if (pos != v.size() || !std::isfinite(d)) config_fail(key + ": not a number: '" + v + "'");
  return d;
}

inline int to_int(const ConfigMap& m, const std::string& key) {
  const double d = to_double(m, key);
  if (d != std::floor(d) || std::abs(d) > 1e9) config_fail(key + ": not an integer");
  return static_cast<int>(d);
}

inline bool to_bool(const ConfigMap& m, const std::string& key) {
  const std::string& v = m.at(key);
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  config_fail(key + ": expected true or false");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Later keys override earlier ones.
inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) detail::config_fail("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      detail::config_fail("line " + std::to_string(lineno) + ": empty key or value");
    out[key] = value;
  }
  return out;
}

/// Builds a validated config from key/value pairs. A `scenario` naming a
/// built-in loads its defaults first; the given keys override them.
inline ExperimentConfig make_config(const ConfigMap& given) {
  using detail::config_fail;
  ConfigMap m;
  if (auto it = given.find("scenario"); it != given.end()) {
    if (const std::string* text = builtin_scenario_text(it->second)) m = parse_config_text(*text);
  }
  for (const auto& [k, v] : given) m[k] = v;

  static const std::vector<std::string> known = {
      "scenario",         "grid.kind",       "grid.resolution",   "grid.resolution_y", "grid.extent",
      "grid.extent_y",    "grid.weight",     "grid.weight_a",     "grid.boundary",     "grid.profile",
      "grid.beta",        "grid.conformal_amplitude", "flow.type", "flow.t0",          "flow.t_end",
      "flow.dt",          "flow.outputs",    "flow.schedule",     "flow.K",            "flow.m",
      "flow.scheme",      "flow.init",       "flow.init_amplitude", "flow.alpha",      "flow.K_minus",
      "flow.tau0",        "flow.oracle",     "checks",            "output.dir",        "output.formats",
      "study.levels",     "study.refine_space", "study.residuals"};
  for (const auto& [k, v] : m) {
    if (std::find(known.begin(), known.end(), k) != known.end()) continue;
    if (k.rfind("checks.", 0) == 0) {
      std::string rest = k.substr(7);
      std::string name = rest;
      if (auto dot = rest.find('.'); dot != std::string::npos) {
        name = rest.substr(0, dot);
        if (rest.substr(dot + 1) != "tolerance") config_fail("unknown key '" + k + "'");
      }
      if (!is_check_name(name)) config_fail("unknown check '" + name + "'");
      continue;
    }
    config_fail("unknown key '" + k + "'");
  }

  ExperimentConfig c;
  c.raw = m;
  auto has = [&](const std::string& k) { return m.count(k) > 0; };
  auto need = [&](const std::string& k) {
    if (!has(k)) config_fail("missing required key '" + k + "'");
  };

  c.scenario = has("scenario") ? m.at("scenario") : "custom";
  for (char ch : c.scenario)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_'))
      config_fail("scenario name may contain letters, digits, '-' and '_' only");

  // grid
  need("grid.kind");
  need("grid.resolution");
  try {
    c.grid.kind = parse_grid_kind(m.at("grid.kind"));
  } catch (const Error&) {
    config_fail("grid.kind: unknown kind '" + m.at("grid.kind") + "'");
  }
  c.grid.resolution = detail::to_int(m, "grid.resolution");
  if (has("grid.resolution_y")) c.grid.resolution_y = detail::to_int(m, "grid.resolution_y");
  if (has("grid.extent")) c.grid.extent = detail::to_double(m, "grid.extent");
  if (c.grid.kind == GridKind::radial_surface && has("grid.profile") && m.at("grid.profile") == "sphere" &&
      !has("grid.extent"))
    c.grid.extent = std::numbers::pi;
  if (has("grid.extent_y")) c.grid.extent_y = detail::to_double(m, "grid.extent_y");
  if (has("grid.weight")) c.grid.weight.id = m.at("grid.weight");
  if (has("grid.weight_a")) c.grid.weight.a = detail::to_double(m, "grid.weight_a");
  if (has("grid.boundary")) {
    try {
      c.grid.boundary = parse_boundary(m.at("grid.boundary"));
    } catch (const Error&) {
      config_fail("grid.boundary: unknown boundary '" + m.at("grid.boundary") + "'");
    }
  } else if (c.grid.kind == GridKind::interval) {
    c.grid.boundary = Boundary::reflecting;
  }
  if (has("grid.profile")) c.grid.profile.id = m.at("grid.profile");
  if (has("grid.beta")) c.grid.profile.beta = detail::to_double(m, "grid.beta");
  if (has("grid.conformal_amplitude")) c.grid.conformal_amplitude = detail::to_double(m, "grid.conformal_amplitude");

  // flow
  if (has("flow.type")) {
    const std::string& t = m.at("flow.type");
    if (t == "heat") c.flow.type = FlowType::heat;
    else if (t == "ricci") c.flow.type = FlowType::ricci;
    else config_fail("flow.type: expected heat or ricci");
  }
  need("flow.t_end");
  need("flow.dt");
  c.flow.t_end = detail::to_double(m, "flow.t_end");
  c.flow.dt = detail::to_double(m, "flow.dt");
  if (has("flow.t0")) c.flow.t0 = detail::to_double(m, "flow.t0");
  else if (c.flow.type == FlowType::heat)
    config_fail("missing required key 'flow.t0'");
  if (has("flow.outputs")) c.flow.outputs = detail::to_int(m, "flow.outputs");
  if (has("flow.schedule")) {
    try {
      c.flow.schedule.kind = parse_schedule(m.at("flow.schedule"));
    } catch (const Error&) {
      config_fail("flow.schedule: unknown schedule '" + m.at("flow.schedule") + "'");
    }
  }
  if (has("flow.K")) c.grid.K = detail::to_double(m, "flow.K");
  if (has("flow.m")) c.grid.m = detail::to_double(m, "flow.m");
  c.flow.schedule.K = c.grid.K;
  if (has("flow.scheme")) {
    try {
      c.flow.scheme = parse_scheme(m.at("flow.scheme"));
    } catch (const Error&) {
      config_fail("flow.scheme: expected backward_euler or crank_nicolson");
    }
  }
  if (has("flow.init")) c.flow.init = m.at("flow.init");
  if (c.flow.init != "kernel" && c.flow.init != "uniform" && c.flow.init != "cosine")
    config_fail("flow.init: expected kernel, uniform or cosine");
  if (has("flow.init_amplitude")) c.flow.init_amplitude = detail::to_double(m, "flow.init_amplitude");
  if (has("flow.alpha")) c.flow.alpha = detail::to_double(m, "flow.alpha");
  c.flow.K_minus = std::max(0.0, -c.grid.K);
  if (has("flow.K_minus")) c.flow.K_minus = detail::to_double(m, "flow.K_minus");
  if (has("flow.tau0")) c.flow.tau0 = detail::to_double(m, "flow.tau0");
  if (has("flow.oracle")) c.flow.oracle = m.at("flow.oracle");
  if (c.flow.oracle != "none" && c.flow.oracle != "gaussian" && c.flow.oracle != "round_sphere")
    config_fail("flow.oracle: expected none, gaussian or round_sphere");

  if (!(c.flow.dt > 0.0)) config_fail("flow.dt must be positive");
  if (c.flow.type == FlowType::heat) {
    if (!(c.flow.t0 > 0.0)) config_fail("flow.t0 must be positive");
    if (!(c.flow.t0 < c.flow.t_end)) config_fail("flow.t0 must precede flow.t_end");
  } else {
    if (!(c.flow.t_end > c.flow.t0)) config_fail("flow.t_end must exceed flow.t0");
  }
  if (c.flow.outputs < 2) config_fail("flow.outputs must be at least 2");
  if (!(c.flow.alpha >= 1.0)) config_fail("flow.alpha must be >= 1");
  if (c.flow.K_minus < 0.0) config_fail("flow.K_minus must be nonnegative");

  // checks
  if (has("checks")) {
    for (const auto& name : detail::split_list(m.at("checks"))) {
      if (!is_check_name(name)) config_fail("unknown check '" + name + "'");
      c.checks.push_back({name, std::nullopt});
    }
  }
  for (const auto& [k, v] : m) {
    if (k.rfind("checks.", 0) != 0) continue;
    std::string rest = k.substr(7);
    const auto dot = rest.find('.');
    const std::string name = dot == std::string::npos ? rest : rest.substr(0, dot);
    auto it = std::find_if(c.checks.begin(), c.checks.end(), [&](const CheckSpec& s) { return s.name == name; });
    if (dot == std::string::npos) {
      const bool on = detail::to_bool(m, k);
      if (on && it == c.checks.end()) c.checks.push_back({name, std::nullopt});
      if (!on && it != c.checks.end()) c.checks.erase(it);
    } else {
      const double tol = detail::to_double(m, k);
      if (!(tol > 0.0)) config_fail(k + ": tolerance overrides must be positive");
      if (it == c.checks.end()) {
        c.checks.push_back({name, tol});
      } else {
        it->tolerance = tol;
      }
    }
  }
  std::stable_sort(c.checks.begin(), c.checks.end(), [](const CheckSpec& a, const CheckSpec& b) {
    const auto& n = check_names();
    return std::find(n.begin(), n.end(), a.name) < std::find(n.begin(), n.end(), b.name);
  });

  // output
  c.output.dir = has("output.dir") ? m.at("output.dir") : c.scenario;
  if (has("output.formats")) {
    c.output.csv = c.output.json = false;
    for (const auto& f : detail::split_list(m.at("output.formats"))) {
      if (f == "csv") c.output.csv = true;
      else if (f == "json") c.output.json = true;
      else config_fail("output.formats: unknown format '" + f + "'");
    }
  }

  // study
  if (has("study.levels")) c.study.levels = detail::to_int(m, "study.levels");
  if (has("study.refine_space")) c.study.refine_space = detail::to_bool(m, "study.refine_space");
  if (has("study.residuals")) c.study.residuals = detail::split_list(m.at("study.residuals"));

  // model-level validation
  try {
    validate(c.grid);
  } catch (const Error& e) {
    config_fail(std::string("grid: ") + e.what());
  }
  static const std::vector<std::string> ricci_checks = {"ricci_step", "conjugate_heat_step", "perelman_f",
                                                        "perelman_w", "soliton_residual", "nfw_residual"};
  for (const auto& chk : c.checks) {
    const bool ricci_only = std::find(ricci_checks.begin(), ricci_checks.end(), chk.name) != ricci_checks.end();
    if (ricci_only != (c.flow.type == FlowType::ricci))
      config_fail("check '" + chk.name + "' does not apply to " +
                  (c.flow.type == FlowType::ricci ? "ricci" : "heat") + " flows");
  }
  if ((c.check("gamma2_integral") || c.check("nn1_decomposition") || c.check("bochner_residual")) &&
      c.grid.kind == GridKind::icosphere)
    config_fail("Hessian-based checks need a structured grid");
  if (!c.flow.schedule.is_static() && c.check("gamma2_integral"))
    config_fail("gamma2_integral applies to static metrics only");
  for (const char* name : {"avr_kappa", "entropy_gap", "stam_lsi_slack"}) {
    if (!c.check(name)) continue;
    try {
      (void)avr_kappa(c.grid);
    } catch (const Error& e) {
      config_fail(std::string(name) + ": " + e.what());
    }
  }
  if (c.flow.type == FlowType::ricci) {
    const bool torus = c.grid.kind == GridKind::torus2d;
    const bool sphere = c.grid.kind == GridKind::radial_surface && c.grid.profile.id == "sphere";
    if (!torus && !sphere) config_fail("ricci flow needs grid.kind torus2d or a radial sphere");
    if (torus && c.flow.init != "kernel") config_fail("ricci flow on the torus starts from flow.init = kernel");
    if (torus && !(c.flow.tau0 > 0.0)) config_fail("flow.tau0 must be positive for the torus backend");
    if (sphere && !(c.flow.t_end < 0.5)) config_fail("flow.t_end must precede the extinction time 1/2");
    if (c.flow.schedule.kind != ScheduleKind::constant) config_fail("flow.schedule applies to heat flows only");
  } else {
    try {
      c.flow.schedule.validate_over(c.flow.t0, c.flow.t_end);
    } catch (const Error& e) {
      config_fail(std::string("flow.schedule: ") + e.what());
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::config_fail("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return make_config(parse_config_text(ss.str()));
}

}  // namespace eplab
