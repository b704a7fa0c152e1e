#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "drp/attack.hpp"
#include "drp/camera.hpp"
#include "drp/controller.hpp"
#include "drp/detector.hpp"
#include "drp/motion.hpp"
#include "drp/scene.hpp"

namespace drp::config {

struct SceneGrid {
  double meters_per_pixel = 0.05;
  double x_min = -10.0;
  // 0 selects speed * max(duration, 10 s) + 80 m at load time.
  double length = 0.0;
  double lateral_half_extent = 52.0;
};

struct PatchSettings {
  scene::PatchPlacement placement;
  double meters_per_pixel = 0.10;
  double base_value = 0.35;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double speed_kmh = 72.0;
  std::uint64_t seed = 0;
  double goal = 0.745;
  double duration_s = 6.0;  // evaluate run length
  // Wide enough for the default 3.6 m patch plus margins and line width.
  scene::RoadSpec road = [] {
    scene::RoadSpec r;
    r.lane_width = 4.05;
    return r;
  }();
  SceneGrid grid;
  camera::CameraConfig camera;
  motion::VehicleParams vehicle;
  motion::VehicleState initial;  // speed filled from speed_kmh
  detector::DetectorConfig detector;
  controller::ControllerConfig controller;
  attack::AttackConfig attack;
  PatchSettings patch;

  scene::Extent extent() const;
  // Uniform patch at base_value with the configured placement and bounds.
  scene::PatchState initial_patch() const;
};

// Parses, fills defaults, applies DRP_SEED, validates. Errors are kConfig and
// name the offending field path.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

// Fully resolved config as JSON text with sorted keys (compact when indent < 0).
std::string canonical_json(const ScenarioConfig& cfg, int indent = -1);
// 16 hex digits of FNV-1a 64 over canonical_json(cfg).
std::string config_hash(const ScenarioConfig& cfg);

void validate(const ScenarioConfig& cfg);

// Rendered scene, mask and detector for one scenario; owns everything a
// LoopContext points at.
class Workbench {
 public:
  explicit Workbench(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  const scene::BevImage& scene() const { return scene_; }
  const Mask& lane_mask() const { return mask_; }
  const detector::LaneDetector& detector() const { return *detector_; }
  attack::LoopContext context() const;

 private:
  ScenarioConfig cfg_;
  scene::BevImage scene_;
  Mask mask_;
  std::unique_ptr<detector::LaneDetector> detector_;
};

}  // namespace drp::config
