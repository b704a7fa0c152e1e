#include "drp/camera.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/LU>

namespace drp::camera {
namespace {

// Rays this close to parallel with the ground are treated as the horizon.
constexpr double kHorizonEps = 1e-9;

}  // namespace

void CameraConfig::validate() const {
  if (!(focal > 0.0) || !(height > 0.0) || !(pitch >= 0.0) ||
      !(pitch < std::numbers::pi / 2.0)) {
    throw Error(ErrorKind::kDegenerateGeometry,
                "camera needs focal > 0, height > 0 and 0 <= pitch < pi/2");
  }
  if (image_width < 2 || image_height < 2) {
    throw Error(ErrorKind::kInvalidArgument, "image must be at least 2x2");
  }
  const PixelRect& r = model_input_rect;
  if (r.width < 2 || r.height < 2 || r.x < 0 || r.y < 0 || r.x + r.width > image_width ||
      r.y + r.height > image_height) {
    throw Error(ErrorKind::kInvalidArgument, "model_input_rect must lie inside the image");
  }
  if (!(max_lateral_offset >= 0.0) || !(max_heading_error >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "pose bounds must be non-negative");
  }
}

Eigen::Matrix3d homography_matrix(const CameraConfig& cfg, const VehicleState& pose) {
  cfg.validate();
  const double sp = std::sin(cfg.pitch);
  const double cp = std::cos(cfg.pitch);
  const double h = cfg.height;

  Eigen::Matrix3d intrinsics;
  intrinsics << cfg.focal, 0.0, cfg.principal_point.x,  //
      0.0, cfg.focal, cfg.principal_point.y,            //
      0.0, 0.0, 1.0;
  // Vehicle ground (d, l, 1) -> camera (right, down, forward).
  Eigen::Matrix3d mount;
  mount << 0.0, -1.0, 0.0,  //
      -sp, 0.0, h * cp,     //
      cp, 0.0, h * sp;
  // Road frame -> vehicle frame.
  const double ch = std::cos(pose.heading);
  const double sh = std::sin(pose.heading);
  Eigen::Matrix3d to_vehicle;
  to_vehicle << ch, sh, -ch * pose.x - sh * pose.y,  //
      -sh, ch, sh * pose.x - ch * pose.y,            //
      0.0, 0.0, 1.0;
  return intrinsics * mount * to_vehicle;
}

Vec2 vehicle_ground_to_image(const CameraConfig& cfg, Vec2 ground) {
  const double sp = std::sin(cfg.pitch);
  const double cp = std::cos(cfg.pitch);
  const double z = ground.x * cp + cfg.height * sp;
  if (!(z > kHorizonEps)) {
    throw Error(ErrorKind::kNoGroundIntersection, "ground point behind the camera");
  }
  const double y = cfg.height * cp - ground.x * sp;
  return {cfg.principal_point.x - cfg.focal * ground.y / z,
          cfg.principal_point.y + cfg.focal * y / z};
}

std::optional<Vec2> image_to_vehicle_ground(const CameraConfig& cfg, Vec2 pixel) {
  Vec2 out;
  if (!detail::Projector(cfg).to_vehicle_ground(pixel.x, pixel.y, out)) return std::nullopt;
  return out;
}

Vec2 vehicle_to_road(const VehicleState& pose, Vec2 local) {
  const double ch = std::cos(pose.heading);
  const double sh = std::sin(pose.heading);
  return {pose.x + ch * local.x - sh * local.y, pose.y + sh * local.x + ch * local.y};
}

Vec2 road_to_vehicle(const VehicleState& pose, Vec2 road) {
  const double ch = std::cos(pose.heading);
  const double sh = std::sin(pose.heading);
  const double dx = road.x - pose.x;
  const double dy = road.y - pose.y;
  return {ch * dx + sh * dy, -sh * dx + ch * dy};
}

Vec2 ground_to_image(const CameraConfig& cfg, const VehicleState& pose, Vec2 point) {
  const Eigen::Matrix3d hmat = homography_matrix(cfg, pose);
  const Eigen::Vector3d p = hmat * Eigen::Vector3d(point.x, point.y, 1.0);
  // The third row of the homography is the camera-forward depth.
  if (!(p.z() > kHorizonEps)) {
    throw Error(ErrorKind::kNoGroundIntersection, "ground point at or behind the camera plane");
  }
  return {p.x() / p.z(), p.y() / p.z()};
}

Vec2 image_to_ground(const CameraConfig& cfg, const VehicleState& pose, Vec2 pixel) {
  const Eigen::Matrix3d hmat = homography_matrix(cfg, pose);
  const Eigen::Vector3d g = hmat.inverse() * Eigen::Vector3d(pixel.x, pixel.y, 1.0);
  // g.z() is 1 / depth: positive only for rays that hit the ground ahead.
  if (!(g.z() > kHorizonEps)) {
    std::ostringstream msg;
    msg << "pixel (" << pixel.x << ", " << pixel.y << ") does not intersect the ground";
    throw Error(ErrorKind::kNoGroundIntersection, msg.str());
  }
  return {g.x() / g.z(), g.y() / g.z()};
}

void check_pose_bounds(const CameraConfig& cfg, const VehicleState& pose) {
  if (std::abs(pose.y) > cfg.max_lateral_offset ||
      std::abs(pose.heading) > cfg.max_heading_error) {
    std::ostringstream msg;
    msg << "pose (y=" << pose.y << ", heading=" << pose.heading
        << ") outside the configured camera envelope";
    throw Error(ErrorKind::kOutOfRange, msg.str());
  }
}

namespace detail {

bool locate(const Projector& proj, double cos_h, double sin_h, const VehicleState& pose,
            const scene::BevImage& scene, int u, int v, BevSample& out) {
  Vec2 local;
  if (!proj.to_vehicle_ground(u, v, local)) return false;
  const double gx = pose.x + cos_h * local.x - sin_h * local.y;
  const double gy = pose.y + sin_h * local.x + cos_h * local.y;
  const double fr = (gx - scene.origin.x) / scene.meters_per_pixel;
  const double fc = (gy - scene.origin.y) / scene.meters_per_pixel;
  if (!(fr >= 0.0 && fr <= scene.rows() - 1.0 && fc >= 0.0 && fc <= scene.cols() - 1.0)) {
    return false;
  }
  split_coordinate(fr, scene.rows(), out.r, out.fr);
  split_coordinate(fc, scene.cols(), out.c, out.fc);
  return true;
}

}  // namespace detail

Frame warp_bev_to_camera(const scene::SceneView& bev, const CameraConfig& cfg,
                         const VehicleState& pose, int index) {
  cfg.validate();
  check_pose_bounds(cfg, pose);
  Frame frame;
  frame.pixels = GrayImage(cfg.image_height, cfg.image_width, 0.0);
  frame.valid = Mask(cfg.image_height, cfg.image_width, 0);
  frame.pose = pose;
  frame.index = index;

  const detail::Projector proj(cfg);
  const double cos_h = std::cos(pose.heading);
  const double sin_h = std::sin(pose.heading);
  for (int v = 0; v < cfg.image_height; ++v) {
    for (int u = 0; u < cfg.image_width; ++u) {
      detail::BevSample s;
      if (!detail::locate(proj, cos_h, sin_h, pose, bev.base(), u, v, s)) continue;
      frame.pixels(v, u) = bilerp(bev.at(s.r, s.c), bev.at(s.r, s.c + 1), bev.at(s.r + 1, s.c),
                                  bev.at(s.r + 1, s.c + 1), s.fr, s.fc);
      frame.valid(v, u) = 1;
    }
  }

  const PixelRect& rect = cfg.model_input_rect;
  for (int v = rect.y; v < rect.y + rect.height; ++v) {
    for (int u = rect.x; u < rect.x + rect.width; ++u) {
      if (frame.valid(v, u) == 0) {
        std::ostringstream msg;
        msg << "model input pixel (" << u << ", " << v << ") not covered by the scene at pose x="
            << pose.x << " y=" << pose.y;
        throw Error(ErrorKind::kIncompleteModelInput, msg.str());
      }
    }
  }
  return frame;
}

Frame warp_bev_to_camera(const scene::BevImage& bev, const CameraConfig& cfg,
                         const VehicleState& pose, int index) {
  return warp_bev_to_camera(scene::SceneView(bev), cfg, pose, index);
}

GrayImage splat_camera_to_bev(const FrameGradient& grad, const CameraConfig& cfg,
                              const VehicleState& pose, const scene::BevImage& scene,
                              const scene::PatchFootprint& target) {
  if (!(grad.pose == pose)) {
    throw Error(ErrorKind::kAdjointMismatch,
                "gradient image was produced at a different pose than requested");
  }
  if (grad.grad.rows() != cfg.image_height || grad.grad.cols() != cfg.image_width) {
    throw Error(ErrorKind::kInvalidArgument, "gradient image does not match camera size");
  }
  GrayImage out(target.patch_rows(), target.patch_cols(), 0.0);
  for_each_scene_contribution(grad.grad, cfg, pose, scene, [&](int r, int c, double g) {
    if (target.drives(r, c)) target.accumulate_adjoint(r, c, g, out);
  });
  return out;
}

}  // namespace drp::camera
