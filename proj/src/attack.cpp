#include "drp/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drp::attack {
namespace {

PatchProjection project_footprint(int t, const camera::Frame& frame, const LoopContext& ctx,
                                  const scene::PatchState& patch) {
  PatchProjection proj;
  proj.t = t;
  proj.base_value = patch.base_value;
  const camera::CameraConfig& cam = ctx.camera;
  const camera::detail::Projector projector(cam);
  const double cos_h = std::cos(frame.pose.heading);
  const double sin_h = std::sin(frame.pose.heading);
  const scene::PatchPlacement& pl = patch.placement;
  const camera::PixelRect& rect = cam.model_input_rect;
  for (int v = rect.y; v < rect.y + rect.height; ++v) {
    for (int u = rect.x; u < rect.x + rect.width; ++u) {
      Vec2 local;
      if (!projector.to_vehicle_ground(u, v, local)) continue;
      const double gx = frame.pose.x + cos_h * local.x - sin_h * local.y;
      const double gy = frame.pose.y + sin_h * local.x + cos_h * local.y;
      if (gx >= pl.start_x && gx < pl.x_max() && gy >= pl.y_min() && gy < pl.y_max()) {
        proj.pixels.push_back(v * cam.image_width + u);
        proj.values.push_back(frame.pixels(v, u));
      }
    }
  }
  return proj;
}

// d/dcoeff_k of sum_{d in D} p'(d) = sum_d k d^{k-1}.
std::vector<double> slope_sum_gradient(const std::vector<double>& decision_points, int degree) {
  std::vector<double> g(static_cast<std::size_t>(degree + 1), 0.0);
  for (double d : decision_points) {
    double power = 1.0;
    for (int k = 1; k <= degree; ++k) {
      g[k] += k * power;
      power *= d;
    }
  }
  return g;
}

}  // namespace

void AttackConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidArgument, msg); };
  if (horizon_frames < 1) fail("attack.horizon_frames must be >= 1");
  if (!(lambda_reg >= 0.0)) fail("attack.lambda_reg must be >= 0");
  if (!(step_size > 0.0)) fail("attack.step_size must be positive");
  if (iterations < 0) fail("attack.iterations must be >= 0");
  if (!(v_min < v_max)) fail("attack.gray_bounds must satisfy v_min < v_max");
  if (max_halvings < 0) fail("attack.max_halvings must be >= 0");
}

double RolloutRecord::max_lateral_deviation() const {
  double out = 0.0;
  for (const auto& s : states) out = std::max(out, motion::lateral_deviation(s));
  return out;
}

RolloutRecord rollout_with_patch(const LoopContext& ctx, const scene::PatchState* patch,
                                 const VehicleState& s0, int frames,
                                 const RolloutOptions& options) {
  if (frames < 0) throw Error(ErrorKind::kInvalidArgument, "frame count must be non-negative");
  std::optional<scene::PatchFootprint> footprint;
  scene::PatchOverlay overlay;
  if (patch != nullptr) {
    patch->validate(ctx.road);
    footprint.emplace(ctx.scene, ctx.lane_mask, *patch);
    overlay = scene::build_overlay(ctx.scene, *footprint, *patch);
  }
  const scene::SceneView view(ctx.scene, patch != nullptr ? &overlay : nullptr);

  RolloutRecord rec;
  rec.states.reserve(static_cast<std::size_t>(frames) + 1);
  rec.states.push_back(s0);
  for (int t = 1; t <= frames; ++t) {
    const VehicleState pose = rec.states.back();
    camera::Frame frame;
    detector::LaneDetection det;
    detector::DetectionTape tape;
    try {
      frame = camera::warp_bev_to_camera(view, ctx.camera, pose, t);
      det = ctx.detector.detect(frame, options.keep_tapes ? &tape : nullptr);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDetectionFailed && e.kind() != ErrorKind::kOutOfRange) throw;
      rec.truncated = true;
      rec.truncation_reason = e.what();
      break;
    }
    detector::DesiredPath path = detector::desired_path(det, ctx.detector.config());
    const double steer = controller::steer_from_path(path, ctx.controller, ctx.vehicle);
    const motion::StepResult next = motion::step(pose, steer, ctx.vehicle);

    if (patch != nullptr) {
      rec.projections.push_back(project_footprint(t, frame, ctx, *patch));
    } else {
      rec.projections.push_back(PatchProjection{t, {}, {}, 0.0});
    }
    rec.detections.push_back(std::move(det));
    rec.paths.push_back(std::move(path));
    if (options.keep_tapes) rec.tapes.push_back(std::move(tape));
    if (options.on_frame) options.on_frame(frame);
    if (options.keep_frames) rec.frames.push_back(std::move(frame));
    rec.steers.push_back(next.applied_steer);
    rec.steer_clamped.push_back(next.clamped);
    rec.states.push_back(next.state);
  }
  return rec;
}

ObjectiveBreakdown attack_objective(std::span<const detector::DesiredPath> paths,
                                 std::span<const PatchProjection> projections, double lambda,
                                 const std::vector<double>& decision_points, Direction direction) {
  if (projections.size() != paths.size()) {
    throw Error(ErrorKind::kInvalidArgument, "one projection per path is required");
  }
  ObjectiveBreakdown out;
  out.per_frame.reserve(paths.size());
  for (std::size_t t = 0; t < paths.size(); ++t) {
    double slopes = 0.0;
    for (double s : controller::path_derivatives(paths[t], decision_points)) slopes += s;
    double reg = 0.0;
    for (double v : projections[t].values) {
      const double dev = v - projections[t].base_value;
      reg += dev * dev;
    }
    out.path_term += slopes;
    out.reg_term += reg;
    out.per_frame.push_back(slopes + lambda * reg);
  }
  out.total = out.path_term + lambda * out.reg_term;
  out.directed = direction_sign(direction) * out.path_term + lambda * out.reg_term;
  return out;
}

camera::FrameGradient frame_gradient(int t, const RolloutRecord& record, const LoopContext& ctx,
                                     const AttackConfig& cfg) {
  if (t < 1 || t > record.frames_evaluated()) {
    throw Error(ErrorKind::kOutOfRange, "frame index outside the rollout");
  }
  if (record.tapes.size() != record.paths.size()) {
    throw Error(ErrorKind::kStaleForwardState, "rollout was recorded without detector tapes");
  }
  const auto i = static_cast<std::size_t>(t - 1);
  const detector::DetectionTape& tape = record.tapes[i];
  if (tape.frame_index != t || !(tape.pose == record.states[i])) {
    throw Error(ErrorKind::kStaleForwardState, "tape does not belong to this rollout frame");
  }
  const camera::CameraConfig& cam = ctx.camera;
  camera::FrameGradient out;
  out.pose = record.states[i];
  out.index = t;
  out.grad = GrayImage(cam.image_height, cam.image_width, 0.0);

  std::vector<double> upstream =
      slope_sum_gradient(ctx.controller.decision_points, ctx.detector.config().poly_degree);
  const double sign = direction_sign(cfg.direction);
  for (double& g : upstream) g *= sign;
  if (!record.frames.empty()) {
    out.grad = detector::detector_gradient(record.frames[i], ctx.detector, tape, upstream);
  } else {
    ctx.detector.backward(tape, upstream, out.grad);
  }

  const PatchProjection& proj = record.projections[i];
  auto flat = out.grad.data();
  for (std::size_t k = 0; k < proj.pixels.size(); ++k) {
    flat[proj.pixels[k]] += 2.0 * cfg.lambda_reg * (proj.values[k] - proj.base_value);
  }
  return out;
}

std::vector<double> frame_weights(std::span<const PatchProjection> projections, WeightMode mode) {
  std::vector<double> w;
  w.reserve(projections.size());
  for (const auto& p : projections) {
    w.push_back(mode == WeightMode::kUniform ? 1.0 : static_cast<double>(p.count()));
  }
  return w;
}

GrayImage aggregate_gradients_bev(std::span<const camera::FrameGradient> grads,
                                  std::span<const VehicleState> poses,
                                  std::span<const double> weights, const LoopContext& ctx,
                                  const scene::PatchFootprint& footprint) {
  if (grads.size() != poses.size() || grads.size() != weights.size()) {
    throw Error(ErrorKind::kInvalidArgument, "one pose and weight per frame gradient required");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) {
    throw Error(ErrorKind::kNoVisibility, "no frame gives the patch any weight");
  }
  GrayImage out(footprint.patch_rows(), footprint.patch_cols(), 0.0);
  // Fixed accumulation order: frame 1 first.
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const GrayImage g =
        camera::splat_camera_to_bev(grads[i], ctx.camera, poses[i], ctx.scene, footprint);
    const double w = weights[i] / total;
    auto dst = out.data();
    auto src = g.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
  }
  return out;
}

Projection project_patch(const GrayImage& values, const GrayImage& update, double step_size,
                         double v_min, double v_max) {
  if (values.rows() != update.rows() || values.cols() != update.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "patch and update shapes differ");
  }
  Projection out;
  out.values = values;
  double norm = 0.0;
  for (double g : update.data()) norm = std::max(norm, std::abs(g));
  if (!(norm > 0.0)) {
    out.no_op = true;
    return out;
  }
  auto dst = out.values.data();
  auto src = update.data();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    dst[k] = std::clamp(dst[k] - step_size * src[k] / norm, v_min, v_max);
  }
  return out;
}

OptimizeResult optimize_patch(const LoopContext& ctx, const VehicleState& s0,
                              const AttackConfig& cfg, const scene::PatchState& initial) {
  cfg.validate();
  const scene::PatchFootprint footprint(ctx.scene, ctx.lane_mask, initial);
  const auto& decision_points = ctx.controller.decision_points;

  OptimizeResult result;
  result.patch = initial;
  scene::PatchState current = initial;
  RolloutRecord record = rollout_with_patch(ctx, &current, s0, cfg.horizon_frames);
  ObjectiveBreakdown objective = attack_objective(record.paths, record.projections, cfg.lambda_reg,
                                               decision_points, cfg.direction);
  double best = objective.directed;
  result.history.push_back({0, objective, 0.0, record.max_lateral_deviation(), best});

  for (int it = 1; it <= cfg.iterations; ++it) {
    const int frames = record.frames_evaluated();
    std::vector<camera::FrameGradient> grads;
    grads.reserve(static_cast<std::size_t>(frames));
    for (int t = 1; t <= frames; ++t) grads.push_back(frame_gradient(t, record, ctx, cfg));
    const std::vector<VehicleState> poses(record.states.begin(), record.states.begin() + frames);
    const std::vector<double> weights = frame_weights(record.projections, cfg.weight_mode);
    GrayImage update = aggregate_gradients_bev(grads, poses, weights, ctx, footprint);
    if (cfg.uniform_patch) {
      const auto data = update.data();
      const double mean = std::accumulate(data.begin(), data.end(), 0.0) / data.size();
      update.fill(mean);
    }

    // Halve the step until the directed objective improves on the current
    // iterate. If no step does, the smallest one is taken anyway so the next
    // iteration sees a new closed loop; the best iterate is kept aside.
    double step = cfg.step_size;
    bool moved = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, step /= 2.0) {
      Projection proj = project_patch(current.values, update, step, cfg.v_min, cfg.v_max);
      if (proj.no_op) break;
      scene::PatchState candidate = current;
      candidate.values = std::move(proj.values);
      RolloutRecord cand_record = rollout_with_patch(ctx, &candidate, s0, cfg.horizon_frames);
      ObjectiveBreakdown cand_obj = attack_objective(cand_record.paths, cand_record.projections,
                                                  cfg.lambda_reg, decision_points, cfg.direction);
      if (cand_obj.directed < objective.directed || h == cfg.max_halvings) {
        current = std::move(candidate);
        record = std::move(cand_record);
        objective = std::move(cand_obj);
        moved = true;
        break;
      }
    }
    if (!moved) {
      // Zero gradient: nothing left to follow.
      result.converged = true;
      break;
    }
    if (objective.directed < best) {
      best = objective.directed;
      result.patch = current;
    }
    result.history.push_back({it, objective, step, record.max_lateral_deviation(), best});
  }
  return result;
}

}  // namespace drp::attack
