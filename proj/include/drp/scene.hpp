#pragma once

#include <cstdint>
#include <optional>

#include "drp/common.hpp"

namespace drp::scene {

// Straight single-lane road painted on the ground plane. Lane lines sit at
// y = +-lane_width / 2 (y left, x forward).
struct RoadSpec {
  double lane_width = 3.6;
  double lane_line_width = 0.15;
  double line_intensity = 0.9;
  double asphalt_intensity = 0.3;
  double texture_noise_amp = 0.0;
  std::uint64_t texture_seed = 0;
  double road_length = 100.0;

  void validate() const;
};

// Axis-aligned ground rectangle in meters, road frame.
struct Extent {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
};

// Pixel (r, c) covers the cell [x_min + r*mpp, x_min + (r+1)*mpp) x [y_min + c*mpp, ...)
// and `origin` is the ground position of the centre of pixel (0, 0). Rows run
// along +x (forward), columns along +y (left).
struct BevImage {
  GrayImage pixels;
  double meters_per_pixel = 0.05;
  Vec2 origin;

  int rows() const { return pixels.rows(); }
  int cols() const { return pixels.cols(); }
  Vec2 ground_at(int r, int c) const {
    return {origin.x + r * meters_per_pixel, origin.y + c * meters_per_pixel};
  }
  // Continuous pixel coordinates (row, col) of a ground point.
  Vec2 index_of(Vec2 ground) const {
    return {(ground.x - origin.x) / meters_per_pixel, (ground.y - origin.y) / meters_per_pixel};
  }
  Extent extent() const;
};

struct PatchPlacement {
  double start_x = 60.0;
  double center_y = 0.0;
  double width = 3.6;
  double length = 36.0;
  double margin = 0.15;

  double y_min() const { return center_y - width / 2.0; }
  double y_max() const { return center_y + width / 2.0; }
  double x_max() const { return start_x + length; }
};

// Optimizable gray grid. values(i, j): i runs along +x from start_x, j along +y
// from placement.y_min(); cell centres sit at (i + 0.5, j + 0.5) * meters_per_pixel.
struct PatchState {
  GrayImage values;
  PatchPlacement placement;
  double meters_per_pixel = 0.10;
  double v_min = 0.05;
  double v_max = 0.60;
  double base_value = 0.35;

  void validate(const RoadSpec& road) const;
};

// Throws kConstraintViolation when the rectangle (plus margin) reaches the
// lane lines.
void validate_placement(const PatchPlacement& placement, const RoadSpec& road);

PatchState make_uniform_patch(const PatchPlacement& placement, double meters_per_pixel,
                              double value, double v_min, double v_max, double base_value);

BevImage render_road_bev(const RoadSpec& spec, const Extent& extent, double meters_per_pixel);

Mask lane_line_mask(const RoadSpec& spec, const Extent& extent, double meters_per_pixel);

// Linear map between patch cells and the scene pixels whose centres fall inside
// the placement rectangle. Pixels under the lane-line mask are excluded.
class PatchFootprint {
 public:
  PatchFootprint(const BevImage& scene, const Mask& lane_mask, const PatchState& patch);

  int row_begin() const { return r0_; }
  int row_end() const { return r1_; }
  int col_begin() const { return c0_; }
  int col_end() const { return c1_; }
  int patch_rows() const { return patch_rows_; }
  int patch_cols() const { return patch_cols_; }

  bool drives(int r, int c) const {
    return r >= r0_ && r < r1_ && c >= c0_ && c < c1_ && (*lane_mask_)(r, c) == 0;
  }

  struct Weights {
    int pr = 0;
    int pc = 0;
    double fr = 0.0;
    double fc = 0.0;
  };
  // Bilinear lookup of scene pixel (r, c) into the patch grid (edge-clamped).
  Weights weights(int r, int c) const;

  double sample(const GrayImage& values, int r, int c) const;

  // Adds `g` times d(scene pixel)/d(values) into `grad` (patch-sized).
  void accumulate_adjoint(int r, int c, double g, GrayImage& grad) const;

  std::int64_t pixel_count() const;

 private:
  const Mask* lane_mask_;
  double scene_mpp_;
  Vec2 scene_origin_;
  PatchPlacement placement_;
  double patch_mpp_;
  int patch_rows_;
  int patch_cols_;
  int r0_ = 0, r1_ = 0, c0_ = 0, c1_ = 0;
};

// The scene pixels inside the footprint with patch values written in; outside
// the block the base scene shows through.
struct PatchOverlay {
  int r0 = 0;
  int c0 = 0;
  GrayImage values;

  bool contains(int r, int c) const {
    return r >= r0 && r < r0 + values.rows() && c >= c0 && c < c0 + values.cols();
  }
};

PatchOverlay build_overlay(const BevImage& scene, const PatchFootprint& footprint,
                           const PatchState& patch);

// Read-only view of a scene with an optional patch overlay composited in.
class SceneView {
 public:
  explicit SceneView(const BevImage& base, const PatchOverlay* overlay = nullptr)
      : base_(&base), overlay_(overlay) {}

  const BevImage& base() const { return *base_; }
  int rows() const { return base_->rows(); }
  int cols() const { return base_->cols(); }

  double at(int r, int c) const {
    if (overlay_ != nullptr && overlay_->contains(r, c)) {
      return overlay_->values(r - overlay_->r0, c - overlay_->c0);
    }
    return base_->pixels(r, c);
  }

 private:
  const BevImage* base_;
  const PatchOverlay* overlay_;
};

BevImage composite_patch(const BevImage& scene, const PatchState& patch, const Mask& mask,
                         const RoadSpec& road);

}  // namespace drp::scene
