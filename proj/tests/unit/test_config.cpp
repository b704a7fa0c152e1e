#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "drp/config.hpp"

namespace drp::config {
namespace {

namespace fs = std::filesystem;

const fs::path kScenarioDir = DRP_SCENARIO_DIR;

ErrorKind kind_of(const std::string& text, std::string* message = nullptr) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    if (message != nullptr) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "config was accepted: " << text;
  return ErrorKind::kInvalidArgument;
}

TEST(Config, EmptyObjectGivesValidDefaults) {
  const ScenarioConfig c = parse_config("{}");
  EXPECT_EQ(c.speed_kmh, 72.0);
  EXPECT_NEAR(c.initial.speed, 20.0, 1e-12);
  EXPECT_EQ(c.goal, 0.745);
  // speed * max(duration, 10 s) + 80 m
  EXPECT_EQ(c.grid.length, 280.0);
  EXPECT_EQ(c.road.road_length, c.grid.x_min + c.grid.length);
  EXPECT_EQ(c.detector.split_column, c.detector.columns / 2);
}

TEST(Config, BundledScenariosLoad) {
  int found = 0;
  for (const char* name : {"straight-72kmh", "straight-105kmh", "straight-126kmh"}) {
    const ScenarioConfig c = load_config(kScenarioDir / (std::string(name) + ".json"));
    EXPECT_EQ(c.name, name);
    EXPECT_EQ(c.patch.placement.width, 3.6);
    EXPECT_EQ(c.patch.placement.length, 36.0);
    EXPECT_EQ(c.road.texture_seed, c.seed);
    EXPECT_EQ(c.attack.seed, c.seed);
    EXPECT_EQ(config_hash(c), config_hash(load_config(kScenarioDir / (std::string(name) + ".json"))));
    ++found;
  }
  EXPECT_EQ(found, 3);
}

TEST(Config, UnknownFieldNamesItsPath) {
  std::string msg;
  EXPECT_EQ(kind_of(R"({"road": {"lane_widht": 4.0}})", &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("road.lane_widht"), std::string::npos) << msg;
  EXPECT_EQ(kind_of(R"({"bogus": 1})", &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("bogus"), std::string::npos);
}

TEST(Config, WrongTypeNamesItsPath) {
  std::string msg;
  EXPECT_EQ(kind_of(R"({"attack": {"iterations": "many"}})", &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("attack.iterations"), std::string::npos) << msg;
  EXPECT_EQ(kind_of(R"({"attack": {"direction": "up"}})", &msg), ErrorKind::kConfig);
  EXPECT_EQ(kind_of(R"({"attack": {"gray_bounds": [0.1]}})", &msg), ErrorKind::kConfig);
  EXPECT_EQ(kind_of("{not json", &msg), ErrorKind::kConfig);
}

TEST(Config, SubConfigViolationsArePrefixed) {
  std::string msg;
  EXPECT_EQ(kind_of(R"({"controller": {"decision_points": [5, 60]}})", &msg), ErrorKind::kConfig);
  EXPECT_EQ(msg.rfind("controller", 0), 0u) << msg;
  EXPECT_EQ(kind_of(R"({"detector": {"tau": 0}})", &msg), ErrorKind::kConfig);
  EXPECT_EQ(msg.rfind("detector", 0), 0u) << msg;
  EXPECT_EQ(kind_of(R"({"attack": {"gray_bounds": [0.6, 0.1]}})", &msg), ErrorKind::kConfig);
}

TEST(Config, PatchMustFitLaneAndScene) {
  std::string msg;
  // The default 3.6 m lane has no room for a 3.6 m patch plus margins.
  EXPECT_EQ(kind_of(R"({"road": {"lane_width": 3.6}})", &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("patch.placement"), std::string::npos) << msg;
  EXPECT_EQ(kind_of(R"({"road": {"lane_width": 4.05}, "patch": {"placement": {"start_x": 400}}})",
                    &msg),
            ErrorKind::kConfig);
  EXPECT_EQ(kind_of(R"({"road": {"lane_width": 4.05}, "patch": {"placement": {"start_x": -5}}})",
                    &msg),
            ErrorKind::kConfig);
}

TEST(Config, CanonicalJsonRoundTrips) {
  const ScenarioConfig c = load_config(kScenarioDir / "straight-105kmh.json");
  const ScenarioConfig again = parse_config(canonical_json(c, 2));
  EXPECT_EQ(canonical_json(again), canonical_json(c));
  EXPECT_EQ(config_hash(again), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, HashTracksContent) {
  ScenarioConfig c = load_config(kScenarioDir / "straight-72kmh.json");
  const std::string h = config_hash(c);
  c.attack.step_size *= 2.0;
  EXPECT_NE(config_hash(c), h);
}

TEST(Config, SeedOverrideFromEnvironment) {
  ::setenv("DRP_SEED", "12345", 1);
  const ScenarioConfig c = parse_config(R"({"seed": 3})");
  ::unsetenv("DRP_SEED");
  EXPECT_EQ(c.seed, 12345u);
  EXPECT_EQ(c.road.texture_seed, 12345u);
  ::setenv("DRP_SEED", "abc", 1);
  EXPECT_EQ(kind_of("{}"), ErrorKind::kConfig);
  ::unsetenv("DRP_SEED");
  EXPECT_EQ(parse_config(R"({"seed": 3})").seed, 3u);
}

TEST(Config, MissingFileIsConfigError) {
  try {
    load_config(kScenarioDir / "does-not-exist.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Workbench, BuildsMatchingScene) {
  const ScenarioConfig c = load_config(kScenarioDir / "straight-72kmh.json");
  const Workbench wb(c);
  EXPECT_EQ(wb.scene().rows(), wb.lane_mask().rows());
  EXPECT_EQ(wb.scene().cols(), wb.lane_mask().cols());
  const attack::LoopContext ctx = wb.context();
  EXPECT_EQ(&ctx.scene, &wb.scene());
  EXPECT_EQ(ctx.detector.config().bands, c.detector.bands);
}

}  // namespace
}  // namespace drp::config
