#include "drp/scene.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace drp::scene {
namespace {

constexpr double kIndexEps = 1e-9;
constexpr double kPlacementTol = 1e-9;

// First pixel index whose centre is >= `bound`, given centres at origin + i*mpp.
int first_center_at_or_after(double bound, double origin, double mpp) {
  return static_cast<int>(std::ceil((bound - origin) / mpp - kIndexEps));
}

struct RasterGeometry {
  int rows = 0;
  int cols = 0;
  Vec2 origin;
};

RasterGeometry raster_geometry(const Extent& extent, double meters_per_pixel) {
  if (!(meters_per_pixel > 0.0) || !std::isfinite(meters_per_pixel)) {
    throw Error(ErrorKind::kInvalidArgument, "meters_per_pixel must be positive");
  }
  const double length = extent.x_max - extent.x_min;
  const double width = extent.y_max - extent.y_min;
  if (!(length > 0.0) || !(width > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "degenerate extent");
  }
  RasterGeometry g;
  g.rows = static_cast<int>(std::lround(length / meters_per_pixel));
  g.cols = static_cast<int>(std::lround(width / meters_per_pixel));
  if (g.rows < 2 || g.cols < 2) {
    throw Error(ErrorKind::kInvalidArgument, "extent smaller than two pixels");
  }
  g.origin = {extent.x_min + meters_per_pixel / 2.0, extent.y_min + meters_per_pixel / 2.0};
  return g;
}

// Column ranges [begin, end) painted as lane line.
std::vector<std::pair<int, int>> line_columns(const RoadSpec& spec, const RasterGeometry& g,
                                              double mpp) {
  std::vector<std::pair<int, int>> ranges;
  for (double center : {-spec.lane_width / 2.0, spec.lane_width / 2.0}) {
    int begin = first_center_at_or_after(center - spec.lane_line_width / 2.0, g.origin.y, mpp);
    int end = first_center_at_or_after(center + spec.lane_line_width / 2.0, g.origin.y, mpp);
    begin = std::clamp(begin, 0, g.cols);
    end = std::clamp(end, 0, g.cols);
    if (end > begin) ranges.emplace_back(begin, end);
  }
  return ranges;
}

double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

void RoadSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidArgument, msg); };
  if (!(lane_width > 0.0)) fail("lane_width must be positive");
  if (!(lane_line_width > 0.0) || !(lane_line_width < lane_width / 4.0)) {
    fail("lane_line_width must be in (0, lane_width/4)");
  }
  if (!(asphalt_intensity >= 0.0) || !(asphalt_intensity < line_intensity) ||
      !(line_intensity <= 1.0)) {
    fail("need 0 <= asphalt_intensity < line_intensity <= 1");
  }
  if (!(texture_noise_amp >= 0.0)) fail("texture_noise_amp must be non-negative");
  if (!(road_length > 0.0)) fail("road_length must be positive");
}

Extent BevImage::extent() const {
  const double h = meters_per_pixel / 2.0;
  return {origin.x - h, origin.x - h + rows() * meters_per_pixel, origin.y - h,
          origin.y - h + cols() * meters_per_pixel};
}

void validate_placement(const PatchPlacement& placement, const RoadSpec& road) {
  if (!(placement.width > 0.0) || !(placement.length > 0.0) || !(placement.margin >= 0.0)) {
    throw Error(ErrorKind::kConstraintViolation,
                "patch.placement: width and length must be positive, margin non-negative");
  }
  const double reach = std::abs(placement.center_y) + placement.width / 2.0 + placement.margin;
  const double interior = (road.lane_width - road.lane_line_width) / 2.0;
  if (reach > interior + kPlacementTol) {
    std::ostringstream msg;
    msg << "patch.placement: |center_y| + width/2 + margin = " << reach
        << " m exceeds the lane interior half-width " << interior << " m";
    throw Error(ErrorKind::kConstraintViolation, msg.str());
  }
}

void PatchState::validate(const RoadSpec& road) const {
  validate_placement(placement, road);
  if (!(v_min >= 0.0) || !(v_min < v_max) || !(v_max < road.line_intensity)) {
    throw Error(ErrorKind::kConstraintViolation,
                "patch bounds must satisfy 0 <= v_min < v_max < line_intensity");
  }
  if (!(meters_per_pixel > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "patch meters_per_pixel must be positive");
  }
  const int rows = static_cast<int>(std::lround(placement.length / meters_per_pixel));
  const int cols = static_cast<int>(std::lround(placement.width / meters_per_pixel));
  if (values.rows() != rows || values.cols() != cols) {
    throw Error(ErrorKind::kInvalidArgument, "patch grid does not match placement / resolution");
  }
  for (double v : values.data()) {
    if (!(v >= v_min && v <= v_max)) {
      throw Error(ErrorKind::kConstraintViolation, "patch value outside [v_min, v_max]");
    }
  }
}

PatchState make_uniform_patch(const PatchPlacement& placement, double meters_per_pixel,
                              double value, double v_min, double v_max, double base_value) {
  if (!(meters_per_pixel > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "patch meters_per_pixel must be positive");
  }
  const int rows = static_cast<int>(std::lround(placement.length / meters_per_pixel));
  const int cols = static_cast<int>(std::lround(placement.width / meters_per_pixel));
  if (rows < 1 || cols < 1) {
    throw Error(ErrorKind::kInvalidArgument, "patch smaller than one cell");
  }
  PatchState patch;
  patch.values = GrayImage(rows, cols, value);
  patch.placement = placement;
  patch.meters_per_pixel = meters_per_pixel;
  patch.v_min = v_min;
  patch.v_max = v_max;
  patch.base_value = base_value;
  return patch;
}

BevImage render_road_bev(const RoadSpec& spec, const Extent& extent, double meters_per_pixel) {
  spec.validate();
  const RasterGeometry g = raster_geometry(extent, meters_per_pixel);
  BevImage bev;
  bev.meters_per_pixel = meters_per_pixel;
  bev.origin = g.origin;
  bev.pixels = GrayImage(g.rows, g.cols, spec.asphalt_intensity);

  if (spec.texture_noise_amp > 0.0) {
    std::mt19937_64 gen(spec.texture_seed);
    for (double& p : bev.pixels.data()) {
      const double noise = spec.texture_noise_amp * (2.0 * unit_uniform(gen) - 1.0);
      p = std::clamp(spec.asphalt_intensity + noise, 0.0, 1.0);
    }
  }
  for (const auto& [begin, end] : line_columns(spec, g, meters_per_pixel)) {
    for (int r = 0; r < g.rows; ++r) {
      auto row = bev.pixels.row(r);
      std::fill(row.begin() + begin, row.begin() + end, spec.line_intensity);
    }
  }
  return bev;
}

Mask lane_line_mask(const RoadSpec& spec, const Extent& extent, double meters_per_pixel) {
  spec.validate();
  const RasterGeometry g = raster_geometry(extent, meters_per_pixel);
  Mask mask(g.rows, g.cols, 0);
  for (const auto& [begin, end] : line_columns(spec, g, meters_per_pixel)) {
    for (int r = 0; r < g.rows; ++r) {
      auto row = mask.row(r);
      std::fill(row.begin() + begin, row.begin() + end, std::uint8_t{1});
    }
  }
  return mask;
}

PatchFootprint::PatchFootprint(const BevImage& scene, const Mask& lane_mask,
                               const PatchState& patch)
    : lane_mask_(&lane_mask),
      scene_mpp_(scene.meters_per_pixel),
      scene_origin_(scene.origin),
      placement_(patch.placement),
      patch_mpp_(patch.meters_per_pixel),
      patch_rows_(patch.values.rows()),
      patch_cols_(patch.values.cols()) {
  if (lane_mask.rows() != scene.rows() || lane_mask.cols() != scene.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "lane mask not aligned with scene");
  }
  if (patch_rows_ < 1 || patch_cols_ < 1) {
    throw Error(ErrorKind::kInvalidArgument, "empty patch grid");
  }
  const Extent ext = scene.extent();
  if (placement_.start_x < ext.x_min - kPlacementTol ||
      placement_.x_max() > ext.x_max + kPlacementTol ||
      placement_.y_min() < ext.y_min - kPlacementTol ||
      placement_.y_max() > ext.y_max + kPlacementTol) {
    throw Error(ErrorKind::kOutOfExtent, "patch placement outside scene extent");
  }
  r0_ = std::clamp(first_center_at_or_after(placement_.start_x, scene_origin_.x, scene_mpp_), 0,
                   scene.rows());
  r1_ = std::clamp(first_center_at_or_after(placement_.x_max(), scene_origin_.x, scene_mpp_), 0,
                   scene.rows());
  c0_ = std::clamp(first_center_at_or_after(placement_.y_min(), scene_origin_.y, scene_mpp_), 0,
                   scene.cols());
  c1_ = std::clamp(first_center_at_or_after(placement_.y_max(), scene_origin_.y, scene_mpp_), 0,
                   scene.cols());
}

PatchFootprint::Weights PatchFootprint::weights(int r, int c) const {
  const double gx = scene_origin_.x + r * scene_mpp_;
  const double gy = scene_origin_.y + c * scene_mpp_;
  const double pr =
      std::clamp((gx - placement_.start_x) / patch_mpp_ - 0.5, 0.0, patch_rows_ - 1.0);
  const double pc = std::clamp((gy - placement_.y_min()) / patch_mpp_ - 0.5, 0.0,
                               patch_cols_ - 1.0);
  Weights w;
  w.pr = static_cast<int>(pr);
  w.pc = static_cast<int>(pc);
  w.fr = pr - w.pr;
  w.fc = pc - w.pc;
  return w;
}

double PatchFootprint::sample(const GrayImage& values, int r, int c) const {
  const Weights w = weights(r, c);
  const int r1 = std::min(w.pr + 1, patch_rows_ - 1);
  const int c1 = std::min(w.pc + 1, patch_cols_ - 1);
  return bilerp(values(w.pr, w.pc), values(w.pr, c1), values(r1, w.pc), values(r1, c1), w.fr,
                w.fc);
}

void PatchFootprint::accumulate_adjoint(int r, int c, double g, GrayImage& grad) const {
  const Weights w = weights(r, c);
  const int r1 = std::min(w.pr + 1, patch_rows_ - 1);
  const int c1 = std::min(w.pc + 1, patch_cols_ - 1);
  grad(w.pr, w.pc) += g * (1.0 - w.fr) * (1.0 - w.fc);
  grad(w.pr, c1) += g * (1.0 - w.fr) * w.fc;
  grad(r1, w.pc) += g * w.fr * (1.0 - w.fc);
  grad(r1, c1) += g * w.fr * w.fc;
}

std::int64_t PatchFootprint::pixel_count() const {
  std::int64_t n = 0;
  for (int r = r0_; r < r1_; ++r) {
    for (int c = c0_; c < c1_; ++c) n += drives(r, c) ? 1 : 0;
  }
  return n;
}

PatchOverlay build_overlay(const BevImage& scene, const PatchFootprint& footprint,
                           const PatchState& patch) {
  PatchOverlay overlay;
  overlay.r0 = footprint.row_begin();
  overlay.c0 = footprint.col_begin();
  overlay.values = GrayImage(footprint.row_end() - footprint.row_begin(),
                             footprint.col_end() - footprint.col_begin());
  for (int r = footprint.row_begin(); r < footprint.row_end(); ++r) {
    for (int c = footprint.col_begin(); c < footprint.col_end(); ++c) {
      overlay.values(r - overlay.r0, c - overlay.c0) =
          footprint.drives(r, c) ? footprint.sample(patch.values, r, c) : scene.pixels(r, c);
    }
  }
  return overlay;
}

BevImage composite_patch(const BevImage& scene, const PatchState& patch, const Mask& mask,
                         const RoadSpec& road) {
  validate_placement(patch.placement, road);
  const PatchFootprint footprint(scene, mask, patch);
  const PatchOverlay overlay = build_overlay(scene, footprint, patch);
  BevImage out = scene;
  for (int r = 0; r < overlay.values.rows(); ++r) {
    for (int c = 0; c < overlay.values.cols(); ++c) {
      out.pixels(overlay.r0 + r, overlay.c0 + c) = overlay.values(r, c);
    }
  }
  return out;
}

}  // namespace drp::scene
