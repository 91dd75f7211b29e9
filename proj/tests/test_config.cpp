#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "eplab/config.hpp"

using namespace eplab;

namespace {

ExperimentConfig from_text(const std::string& text) { return make_config(parse_config_text(text)); }

Errc code_of(const std::string& text) {
  try {
    (void)from_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "config was accepted:\n" << text;
  return Errc::invalid_spec;
}

const std::string kCircle = R"(scenario = test-circle
grid.kind = circle
grid.resolution = 64
flow.type = heat
flow.t0 = 0.05
flow.t_end = 0.5
flow.dt = 0.001
)";

}  // namespace

TEST(Config, ParsesCommentsAndBlankLines) {
  const auto m = parse_config_text("# header\n\n  a.b = 1  # trailing\nc = x y\n");
  EXPECT_EQ(m.at("a.b"), "1");
  EXPECT_EQ(m.at("c"), "x y");
}

TEST(Config, MinimalHeatRun) {
  const auto c = from_text(kCircle + "checks = step, entropy\nchecks.entropy.tolerance = 0.2\n");
  EXPECT_EQ(c.scenario, "test-circle");
  EXPECT_EQ(c.grid.kind, GridKind::circle);
  EXPECT_DOUBLE_EQ(c.flow.dt, 0.001);
  ASSERT_EQ(c.checks.size(), 2u);
  ASSERT_NE(c.check("entropy"), nullptr);
  EXPECT_DOUBLE_EQ(c.check("entropy")->tolerance.value(), 0.2);
  EXPECT_EQ(c.output.dir, "test-circle");
}

TEST(Config, MissingDtIsAConfigError) {
  std::string text = kCircle;
  text.erase(text.find("flow.dt"));
  EXPECT_EQ(code_of(text), Errc::config_error);
}

TEST(Config, UnknownKeysAndChecksRejected) {
  EXPECT_EQ(code_of(kCircle + "grid.colour = red\n"), Errc::config_error);
  EXPECT_EQ(code_of(kCircle + "checks = step, telepathy\n"), Errc::config_error);
  EXPECT_EQ(code_of(kCircle + "checks.entropy.slack = 1\n"), Errc::config_error);
  EXPECT_EQ(code_of(kCircle + "this line has no equals\n"), Errc::config_error);
}

TEST(Config, ChecksMustMatchFlowType) {
  EXPECT_EQ(code_of(kCircle + "checks = perelman_f\n"), Errc::config_error);
  EXPECT_EQ(code_of(R"(scenario = t
grid.kind = radial_surface
grid.profile = sphere
grid.resolution = 100
flow.type = ricci
flow.t0 = 0
flow.t_end = 0.3
flow.dt = 0.01
flow.init = uniform
checks = entropy
)"),
            Errc::config_error);
}

TEST(Config, CompactModelsHaveNoVolumeRatio) {
  EXPECT_EQ(code_of(kCircle + "checks = entropy_gap\n"), Errc::config_error);
}

TEST(Config, RicciSphereMustStopBeforeExtinction) {
  EXPECT_EQ(code_of(R"(scenario = t
grid.kind = radial_surface
grid.profile = sphere
grid.resolution = 100
flow.type = ricci
flow.t0 = 0
flow.t_end = 0.5
flow.dt = 0.01
flow.init = uniform
)"),
            Errc::config_error);
}

TEST(Config, BuiltinDefaultsCanBeOverridden) {
  const auto c = from_text("scenario = circle-epci\nflow.dt = 0.002\n");
  EXPECT_DOUBLE_EQ(c.flow.dt, 0.002);
  EXPECT_EQ(c.grid.resolution, 256);
}

TEST(Config, EveryBuiltinParses) {
  for (const auto& [name, text] : builtin_scenarios()) {
    const auto c = from_text(text);
    EXPECT_EQ(c.scenario, name);
    EXPECT_FALSE(c.checks.empty()) << name;
  }
}

TEST(Config, ShippedFilesMatchBuiltins) {
  for (const auto& [name, text] : builtin_scenarios()) {
    const auto path = std::filesystem::path(EPLAB_CONFIG_DIR) / (name + ".cfg");
    std::ifstream in(path, std::ios::binary);
    ASSERT_TRUE(in) << path;
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), text) << path;
  }
}
