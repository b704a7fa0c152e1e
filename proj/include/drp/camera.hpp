#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Core>

#include "drp/common.hpp"
#include "drp/motion.hpp"
#include "drp/scene.hpp"

namespace drp::camera {

using motion::VehicleState;

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(int u, int v) const {
    return u >= x && u < x + width && v >= y && v < y + height;
  }
};

// Pinhole camera mounted at the vehicle reference point, looking along the
// heading and pitched down. Pixel (u, v) has its centre at integer coordinates.
struct CameraConfig {
  double focal = 400.0;
  Vec2 principal_point{319.5, 239.5};
  double height = 1.2;
  double pitch = 0.06;
  int image_width = 640;
  int image_height = 480;
  PixelRect model_input_rect{64, 224, 512, 256};
  // Pose envelope within which generated frames are guaranteed usable.
  double max_lateral_offset = 3.0;
  double max_heading_error = 0.2;

  void validate() const;
};

// 3x3 map from homogeneous road-frame ground coordinates (x, y, 1) to
// homogeneous pixel coordinates.
Eigen::Matrix3d homography_matrix(const CameraConfig& cfg, const VehicleState& pose);

// Vehicle-frame ground point (forward d, left l) <-> pixel. Pose independent.
Vec2 vehicle_ground_to_image(const CameraConfig& cfg, Vec2 ground);
std::optional<Vec2> image_to_vehicle_ground(const CameraConfig& cfg, Vec2 pixel);

Vec2 vehicle_to_road(const VehicleState& pose, Vec2 local);
Vec2 road_to_vehicle(const VehicleState& pose, Vec2 road);

// Road-frame ground point <-> pixel through homography_matrix. Both throw
// kNoGroundIntersection at or beyond the horizon / behind the camera.
Vec2 ground_to_image(const CameraConfig& cfg, const VehicleState& pose, Vec2 point);
Vec2 image_to_ground(const CameraConfig& cfg, const VehicleState& pose, Vec2 pixel);

// One camera input. pixels/valid are image_height x image_width.
struct Frame {
  GrayImage pixels;
  Mask valid;
  VehicleState pose;
  int index = 0;
};

void check_pose_bounds(const CameraConfig& cfg, const VehicleState& pose);

// Bilinearly samples the (composited) scene at image_to_ground of every pixel.
// Throws kIncompleteModelInput if any model-input pixel falls off the scene.
Frame warp_bev_to_camera(const scene::SceneView& bev, const CameraConfig& cfg,
                         const VehicleState& pose, int index = 0);
Frame warp_bev_to_camera(const scene::BevImage& bev, const CameraConfig& cfg,
                         const VehicleState& pose, int index = 0);

// Gradient of a scalar with respect to the pixels of a frame, tagged with the
// pose the frame was generated at.
struct FrameGradient {
  GrayImage grad;
  VehicleState pose;
  int index = 0;
};

// Visits (scene row, scene col, contribution) for the adjoint of the warp.
template <typename Fn>
void for_each_scene_contribution(const GrayImage& grad, const CameraConfig& cfg,
                                 const VehicleState& pose, const scene::BevImage& scene, Fn&& fn);

// Exact adjoint of patch values -> composite -> warp for one frame.
GrayImage splat_camera_to_bev(const FrameGradient& grad, const CameraConfig& cfg,
                              const VehicleState& pose, const scene::BevImage& scene,
                              const scene::PatchFootprint& target);

// -- implementation details ---------------------------------------------------

namespace detail {

struct Projector {
  explicit Projector(const CameraConfig& cfg)
      : sp(std::sin(cfg.pitch)), cp(std::cos(cfg.pitch)), inv_focal(1.0 / cfg.focal),
        u0(cfg.principal_point.x), v0(cfg.principal_point.y), height(cfg.height) {}

  bool to_vehicle_ground(double u, double v, Vec2& out) const {
    const double xn = (u - u0) * inv_focal;
    const double yn = (v - v0) * inv_focal;
    const double denom = sp + yn * cp;
    if (!(denom > 1e-9)) return false;
    const double t = height / denom;
    out = {t * (cp - yn * sp), -t * xn};
    return true;
  }

  double sp, cp, inv_focal, u0, v0, height;
};

struct BevSample {
  int r = 0;
  int c = 0;
  double fr = 0.0;
  double fc = 0.0;
};

// Pixel -> BEV bilinear base index; false when off the scene or above the horizon.
bool locate(const Projector& proj, double cos_h, double sin_h, const VehicleState& pose,
            const scene::BevImage& scene, int u, int v, BevSample& out);

}  // namespace detail

template <typename Fn>
void for_each_scene_contribution(const GrayImage& grad, const CameraConfig& cfg,
                                 const VehicleState& pose, const scene::BevImage& scene,
                                 Fn&& fn) {
  const detail::Projector proj(cfg);
  const double cos_h = std::cos(pose.heading);
  const double sin_h = std::sin(pose.heading);
  for (int v = 0; v < grad.rows(); ++v) {
    for (int u = 0; u < grad.cols(); ++u) {
      const double g = grad(v, u);
      if (g == 0.0) continue;
      detail::BevSample s;
      if (!detail::locate(proj, cos_h, sin_h, pose, scene, u, v, s)) continue;
      fn(s.r, s.c, g * (1.0 - s.fr) * (1.0 - s.fc));
      fn(s.r, s.c + 1, g * (1.0 - s.fr) * s.fc);
      fn(s.r + 1, s.c, g * s.fr * (1.0 - s.fc));
      fn(s.r + 1, s.c + 1, g * s.fr * s.fc);
    }
  }
}

}  // namespace drp::camera
