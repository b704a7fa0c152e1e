#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drp/camera.hpp"
#include "drp/controller.hpp"
#include "drp/detector.hpp"
#include "drp/motion.hpp"
#include "drp/scene.hpp"

namespace drp::attack {

using motion::VehicleState;

enum class Direction { kLeft, kRight };
enum class WeightMode { kCoverage, kUniform };

// +1 when attacking to the right (minimise the path term), -1 to the left.
inline double direction_sign(Direction d) { return d == Direction::kRight ? 1.0 : -1.0; }

struct AttackConfig {
  int horizon_frames = 50;
  double lambda_reg = 1e-5;
  Direction direction = Direction::kRight;
  double step_size = 0.02;
  int iterations = 200;
  WeightMode weight_mode = WeightMode::kCoverage;
  double v_min = 0.05;
  double v_max = 0.60;
  std::uint64_t seed = 0;
  // Restricts the patch to a single gray level (all cells move together).
  bool uniform_patch = false;
  int max_halvings = 5;

  void validate() const;
};

// Everything the closed loop reads. Non-owning; the referenced objects must
// outlive the context.
struct LoopContext {
  const scene::RoadSpec& road;
  const scene::BevImage& scene;
  const Mask& lane_mask;
  const camera::CameraConfig& camera;
  const detector::LaneDetector& detector;
  const controller::ControllerConfig& controller;
  const motion::VehicleParams& vehicle;
};

// Omega_t: the frame-t pixels (inside the model input) whose ground point lies on
// the patch, with their values.
struct PatchProjection {
  int t = 0;
  std::vector<int> pixels;  // v * image_width + u
  std::vector<double> values;
  double base_value = 0.0;

  std::int64_t count() const { return static_cast<std::int64_t>(pixels.size()); }
};

struct RolloutOptions {
  bool keep_frames = false;
  bool keep_tapes = true;
  // Called with every generated frame, in order.
  std::function<void(const camera::Frame&)> on_frame;
};

// Frame t (1-based) is stored at index t - 1 and was captured at states[t - 1];
// states[t] is the pose after applying steers[t - 1].
struct RolloutRecord {
  std::vector<VehicleState> states;
  std::vector<double> steers;
  std::vector<bool> steer_clamped;
  std::vector<camera::Frame> frames;
  std::vector<detector::LaneDetection> detections;
  std::vector<detector::DesiredPath> paths;
  std::vector<detector::DetectionTape> tapes;
  std::vector<PatchProjection> projections;
  bool truncated = false;
  std::string truncation_reason;

  int frames_evaluated() const { return static_cast<int>(paths.size()); }
  double max_lateral_deviation() const;
};

// Closed loop for `frames` frames: composite, warp at s_{t-1}, detect, steer,
// step. Detection failure or leaving the camera pose envelope truncates the
// record; an incomplete model input is a hard error.
RolloutRecord rollout_with_patch(const LoopContext& ctx, const scene::PatchState* patch,
                                 const VehicleState& s0, int frames,
                                 const RolloutOptions& options = {});

struct ObjectiveBreakdown {
  double path_term = 0.0;
  double reg_term = 0.0;
  double total = 0.0;
  // dir * path_term + lambda * reg_term; the quantity the optimizer minimises.
  double directed = 0.0;
  std::vector<double> per_frame;
};

ObjectiveBreakdown attack_objective(std::span<const detector::DesiredPath> paths,
                                 std::span<const PatchProjection> projections, double lambda,
                                 const std::vector<double>& decision_points, Direction direction);

// Gradient of the directed objective w.r.t. the pixels of frame t (1-based),
// states held at their rolled-out values.
camera::FrameGradient frame_gradient(int t, const RolloutRecord& record, const LoopContext& ctx,
                                     const AttackConfig& cfg);

std::vector<double> frame_weights(std::span<const PatchProjection> projections, WeightMode mode);

GrayImage aggregate_gradients_bev(std::span<const camera::FrameGradient> grads,
                                  std::span<const VehicleState> poses,
                                  std::span<const double> weights, const LoopContext& ctx,
                                  const scene::PatchFootprint& footprint);

struct Projection {
  GrayImage values;
  bool no_op = false;
};

// values - step * update / |update|_inf, clamped to [v_min, v_max].
Projection project_patch(const GrayImage& values, const GrayImage& update, double step_size,
                         double v_min, double v_max);

struct HistoryEntry {
  int iter = 0;
  ObjectiveBreakdown objective;
  double step = 0.0;
  double max_dev = 0.0;
  // Lowest directed objective seen up to and including this iteration.
  double best_directed = 0.0;
};

struct OptimizeResult {
  scene::PatchState patch;  // best iterate
  std::vector<HistoryEntry> history;
  bool converged = false;
};

OptimizeResult optimize_patch(const LoopContext& ctx, const VehicleState& s0,
                              const AttackConfig& cfg, const scene::PatchState& initial);

}  // namespace drp::attack
