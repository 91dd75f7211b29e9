// Command-line driver: run a scenario, run a refinement study, inspect the catalog.
#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "eplab/config.hpp"
#include "eplab/error.hpp"
#include "eplab/runner.hpp"

namespace {

enum Exit { kPass = 0, kCheckFailure = 1, kConfigFailure = 2, kNumericalFailure = 3 };

// A path that exists is read as a file; otherwise the argument may name a built-in scenario.
eplab::ExperimentConfig resolve(const std::string& arg) {
  if (std::filesystem::exists(arg)) return eplab::load_config(arg);
  if (const std::string* text = eplab::builtin_scenario_text(arg)) return eplab::make_config(eplab::parse_config_text(*text));
  throw eplab::Error(eplab::Errc::config_error, "no such config file or scenario '" + arg + "'");
}

void print_checks(const eplab::RunReport& r) {
  for (const auto& c : r.checks) {
    std::printf("%-24s %s\n", c.name.c_str(), c.passed() ? "PASS" : "FAIL");
    for (const auto& k : c.conditions)
      if (!k.passed)
        std::printf("    %s: %s %s %s (t = %s)\n", k.what.c_str(), eplab::format_number(k.value).c_str(), k.relation.c_str(),
                    eplab::format_number(k.limit).c_str(), eplab::format_number(k.t).c_str());
  }
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const eplab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return eplab::is_configuration_error(e.code()) ? kConfigFailure : kNumericalFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericalFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-power experiments on weighted graphs and Ricci flow backgrounds"};
  app.require_subcommand(1);

  std::string run_path;
  auto* run = app.add_subcommand("run", "Run one scenario and write trace.csv and summary.json");
  run->add_option("config", run_path, "Config file or built-in scenario name")->required();

  std::string study_path;
  int levels = 0;
  auto* study = app.add_subcommand("study", "Refinement study of the identity residuals");
  study->add_option("config", study_path, "Config file or built-in scenario name")->required();
  study->add_option("--levels", levels, "Number of refinement levels (default: study.levels)");

  auto* list = app.add_subcommand("list-scenarios", "List built-in scenarios");

  std::string show_name;
  auto* show = app.add_subcommand("show", "Print a built-in scenario config");
  show->add_option("scenario", show_name, "Scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigFailure;
  }

  if (*list) {
    for (const auto& [name, text] : eplab::builtin_scenarios()) std::printf("%s\n", name.c_str());
    return kPass;
  }
  if (*show) {
    const std::string* text = eplab::builtin_scenario_text(show_name);
    if (!text) {
      std::fprintf(stderr, "error: unknown scenario '%s'\n", show_name.c_str());
      return kConfigFailure;
    }
    std::fputs(text->c_str(), stdout);
    return kPass;
  }
  if (*run) {
    return guarded([&] {
      const eplab::ExperimentConfig c = resolve(run_path);
      const eplab::RunReport r = eplab::run_experiment(c);
      print_checks(r);
      std::printf("output: %s\n", eplab::output_dir(c).string().c_str());
      return r.passed() ? kPass : kCheckFailure;
    });
  }
  return guarded([&] {
    const eplab::ExperimentConfig c = resolve(study_path);
    const eplab::StudyReport s = eplab::run_study(c, levels > 0 ? levels : c.study.levels);
    for (const auto& name : s.residuals) {
      std::printf("%-24s", name.c_str());
      for (const auto& lv : s.sizes) std::printf(" %.3e", lv.at(name));
      std::printf("  order %s %s\n", eplab::format_number(s.min_order(name)).c_str(),
                  s.min_order(name) >= eplab::kMinOrder ? "PASS" : "FAIL");
    }
    std::printf("output: %s\n", eplab::output_dir(c).string().c_str());
    return s.passed() ? kPass : kCheckFailure;
  });
}
