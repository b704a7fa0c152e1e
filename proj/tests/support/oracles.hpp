#pragma once

// Reference checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "drp/attack.hpp"
#include "drp/config.hpp"
#include "fixtures.hpp"

namespace drp::oracle {

// Worst ground-image-ground round-trip error (meters) over an n x n grid of
// in-view ground points 3-55 m ahead and +-6 m across, seen from `pose`.
inline double homography_round_trip_worst(const camera::CameraConfig& cfg,
                                          const motion::VehicleState& pose, int n) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 local{3.0 + 52.0 * i / (n - 1), -6.0 + 12.0 * j / (n - 1)};
      const Vec2 p = camera::vehicle_to_road(pose, local);
      const Vec2 back =
          camera::image_to_ground(cfg, pose, camera::ground_to_image(cfg, pose, p));
      worst = std::max(worst, std::hypot(back.x - p.x, back.y - p.y));
    }
  }
  return worst;
}

// Worst relative gap in <g, J d> = <splat(g), d> over `pairs` random patch
// perturbations d and frame gradients g, where J maps patch cells to frame
// pixels (the overlay on an all-zero scene is exactly J d).
inline double splat_adjoint_worst(const config::Workbench& wb, int pairs, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  scene::BevImage zero = wb.scene();
  zero.pixels.fill(0.0);
  const camera::CameraConfig& cam = wb.config().camera;
  const scene::PatchState shape = wb.config().initial_patch();
  const scene::PatchFootprint fp(wb.scene(), wb.lane_mask(), shape);
  const double lead = std::max(0.0, shape.placement.start_x - 45.0);
  std::uniform_real_distribution<double> x(lead, lead + 15.0), y(-0.5, 0.5), h(-0.05, 0.05);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const motion::VehicleState pose{x(gen), y(gen), h(gen), 20.0};
    scene::PatchState delta = shape;
    delta.values = testing::random_image(shape.values.rows(), shape.values.cols(), gen);
    const GrayImage g = testing::random_image(cam.image_height, cam.image_width, gen);
    const scene::PatchOverlay overlay = scene::build_overlay(zero, fp, delta);
    const GrayImage jd =
        camera::warp_bev_to_camera(scene::SceneView(zero, &overlay), cam, pose).pixels;
    const GrayImage sg = camera::splat_camera_to_bev({g, pose, 1}, cam, pose, wb.scene(), fp);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) lhs += g.data()[k] * jd.data()[k];
    for (std::size_t k = 0; k < sg.size(); ++k) rhs += sg.data()[k] * delta.values.data()[k];
    worst = std::max(worst, std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12}));
  }
  return worst;
}

struct GradientCheck {
  std::vector<double> rel_errors;  // sorted ascending
  double p95 = 0.0;
};

// Directed objective of frames 1..T with the poses held at `states`, as a
// function of the patch. This is the quantity frame_gradient differentiates.
inline double fixed_pose_objective(const attack::LoopContext& ctx, const attack::AttackConfig& cfg,
                                   const attack::RolloutRecord& record,
                                   const scene::PatchState& patch) {
  const scene::PatchFootprint footprint(ctx.scene, ctx.lane_mask, patch);
  const scene::PatchOverlay overlay = scene::build_overlay(ctx.scene, footprint, patch);
  const scene::SceneView view(ctx.scene, &overlay);
  const double sign = attack::direction_sign(cfg.direction);
  double total = 0.0;
  for (int t = 1; t <= record.frames_evaluated(); ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const camera::Frame frame = camera::warp_bev_to_camera(view, ctx.camera, record.states[i], t);
    const detector::DesiredPath path =
        detector::desired_path(ctx.detector.detect(frame), ctx.detector.config());
    for (double s : controller::path_derivatives(path, ctx.controller.decision_points)) {
      total += sign * s;
    }
    const attack::PatchProjection& proj = record.projections[i];
    const auto flat = frame.pixels.data();
    for (int k : proj.pixels) {
      const double dev = flat[static_cast<std::size_t>(k)] - proj.base_value;
      total += cfg.lambda_reg * dev * dev;
    }
  }
  return total;
}

// Analytic d(objective)/d(patch cell), summed over frames, against central
// differences of fixed_pose_objective on `samples` randomly drawn visible cells.
inline GradientCheck end_to_end_gradient_check(const config::Workbench& wb,
                                               const scene::PatchState& patch, int frames,
                                               int samples, double h, std::uint64_t seed) {
  const attack::LoopContext ctx = wb.context();
  const attack::AttackConfig& cfg = wb.config().attack;
  attack::RolloutOptions opts;
  opts.keep_frames = true;
  const attack::RolloutRecord record =
      attack::rollout_with_patch(ctx, &patch, wb.config().initial, frames, opts);
  const scene::PatchFootprint footprint(ctx.scene, ctx.lane_mask, patch);

  GrayImage analytic(patch.values.rows(), patch.values.cols(), 0.0);
  for (int t = 1; t <= record.frames_evaluated(); ++t) {
    const camera::FrameGradient g = attack::frame_gradient(t, record, ctx, cfg);
    const GrayImage s = camera::splat_camera_to_bev(g, ctx.camera, g.pose, ctx.scene, footprint);
    for (std::size_t k = 0; k < s.size(); ++k) analytic.data()[k] += s.data()[k];
  }

  std::vector<std::pair<int, int>> visible;
  for (int r = 0; r < analytic.rows(); ++r) {
    for (int c = 0; c < analytic.cols(); ++c) {
      if (analytic(r, c) != 0.0) visible.emplace_back(r, c);
    }
  }
  std::mt19937_64 gen(seed);
  std::shuffle(visible.begin(), visible.end(), gen);
  visible.resize(std::min<std::size_t>(visible.size(), static_cast<std::size_t>(samples)));

  GradientCheck out;
  for (const auto& [r, c] : visible) {
    scene::PatchState up = patch, dn = patch;
    up.values(r, c) += h;
    dn.values(r, c) -= h;
    const double fd = (fixed_pose_objective(ctx, cfg, record, up) -
                       fixed_pose_objective(ctx, cfg, record, dn)) /
                      (2.0 * h);
    const double a = analytic(r, c);
    out.rel_errors.push_back(std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-300}));
  }
  std::sort(out.rel_errors.begin(), out.rel_errors.end());
  if (!out.rel_errors.empty()) {
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * out.rel_errors.size())) - 1;
    out.p95 = out.rel_errors[idx];
  }
  return out;
}

struct OneDResult {
  double optimized = 0.0;
  double optimized_objective = 0.0;
  double brute_force = 0.0;
  double brute_force_objective = 0.0;
  double grid_step = 0.005;
};

inline double uniform_patch_objective(const attack::LoopContext& ctx,
                                      const config::ScenarioConfig& c, double value) {
  scene::PatchState p = c.initial_patch();
  p.values.fill(value);
  const attack::RolloutRecord rec =
      attack::rollout_with_patch(ctx, &p, c.initial, c.attack.horizon_frames);
  return attack::attack_objective(rec.paths, rec.projections, c.attack.lambda_reg,
                               c.controller.decision_points, c.attack.direction)
      .directed;
}

// The single-gray-value instance: a 12 m patch 10 m ahead, 20 frames, no
// regulariser. The optimizer result is compared with a 0.005-step sweep.
inline config::ScenarioConfig one_d_instance(config::ScenarioConfig c) {
  c.road.texture_noise_amp = 0.02;
  c.patch.placement.start_x = 10.0;
  c.patch.placement.length = 12.0;
  c.attack.horizon_frames = 20;
  c.attack.lambda_reg = 0.0;
  c.attack.uniform_patch = true;
  return c;
}

inline OneDResult one_d_sanity(const config::ScenarioConfig& c) {
  const config::Workbench wb(c);
  const attack::LoopContext ctx = wb.context();
  OneDResult out;
  out.brute_force_objective = HUGE_VAL;
  const int steps = static_cast<int>(std::lround((c.attack.v_max - c.attack.v_min) / out.grid_step));
  for (int i = 0; i <= steps; ++i) {
    const double v = std::min(c.attack.v_max, c.attack.v_min + out.grid_step * i);
    const double f = uniform_patch_objective(ctx, c, v);
    if (f < out.brute_force_objective) {
      out.brute_force_objective = f;
      out.brute_force = v;
    }
  }
  const attack::OptimizeResult r =
      attack::optimize_patch(ctx, c.initial, c.attack, c.initial_patch());
  out.optimized = r.patch.values(0, 0);
  out.optimized_objective = r.history.back().best_directed;
  return out;
}

}  // namespace drp::oracle
