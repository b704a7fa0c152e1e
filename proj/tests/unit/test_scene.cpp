#include <gtest/gtest.h>

#include <cmath>

#include "drp/scene.hpp"

namespace drp::scene {
namespace {

RoadSpec clean_road(double lane_width = 3.6) {
  RoadSpec r;
  r.lane_width = lane_width;
  r.road_length = 60.0;
  return r;
}

const Extent kExtent{0.0, 60.0, -4.0, 4.0};

TEST(RenderRoad, ZeroNoiseGivesExactAsphaltOffTheLines) {
  const RoadSpec road = clean_road();
  const BevImage bev = render_road_bev(road, kExtent, 0.05);
  const Mask mask = lane_line_mask(road, kExtent, 0.05);
  for (int r = 0; r < bev.rows(); ++r) {
    for (int c = 0; c < bev.cols(); ++c) {
      if (mask(r, c) == 0) {
        ASSERT_EQ(bev.pixels(r, c), road.asphalt_intensity);
      } else {
        ASSERT_EQ(bev.pixels(r, c), road.line_intensity);
      }
    }
  }
}

TEST(RenderRoad, SameSeedIsBitIdentical) {
  RoadSpec road = clean_road();
  road.texture_noise_amp = 0.05;
  road.texture_seed = 42;
  EXPECT_EQ(render_road_bev(road, kExtent, 0.05).pixels, render_road_bev(road, kExtent, 0.05).pixels);
  RoadSpec other = road;
  other.texture_seed = 43;
  EXPECT_FALSE(render_road_bev(road, kExtent, 0.05).pixels ==
               render_road_bev(other, kExtent, 0.05).pixels);
}

TEST(RenderRoad, NoisyPixelsStayInUnitRange) {
  RoadSpec road = clean_road();
  road.asphalt_intensity = 0.02;
  road.texture_noise_amp = 0.2;
  const BevImage bev = render_road_bev(road, kExtent, 0.05);
  for (double v : bev.pixels.data()) {
    ASSERT_TRUE(std::isfinite(v));
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(RenderRoad, LinePixelAtNominalOffset) {
  const RoadSpec road = clean_road();
  const BevImage bev = render_road_bev(road, kExtent, 0.05);
  const Vec2 idx = bev.index_of({10.0, 1.8});
  EXPECT_EQ(bev.pixels(static_cast<int>(std::lround(idx.x)), static_cast<int>(std::lround(idx.y))),
            road.line_intensity);
  const Vec2 idx_right = bev.index_of({10.0, -1.8});
  EXPECT_EQ(bev.pixels(static_cast<int>(std::lround(idx_right.x)),
                       static_cast<int>(std::lround(idx_right.y))),
            road.line_intensity);
}

TEST(RenderRoad, RejectsBadResolutionAndExtent) {
  const RoadSpec road = clean_road();
  EXPECT_THROW(render_road_bev(road, kExtent, 0.0), Error);
  EXPECT_THROW(render_road_bev(road, kExtent, -0.1), Error);
  try {
    render_road_bev(road, Extent{0.0, 10.0, 0.0, 0.0}, 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(RenderRoad, TranslationInvariantAlongTheRoad) {
  const RoadSpec road = clean_road();
  const BevImage a = render_road_bev(road, kExtent, 0.05);
  const BevImage b = render_road_bev(road, Extent{1.0, 61.0, -4.0, 4.0}, 0.05);
  for (int r = 0; r < a.rows() - 20; ++r) {
    for (int c = 0; c < a.cols(); ++c) ASSERT_EQ(a.pixels(r + 20, c), b.pixels(r, c));
  }
}

TEST(LaneMask, DisjointFromLaneInterior) {
  const RoadSpec road = clean_road();
  const Mask mask = lane_line_mask(road, kExtent, 0.05);
  const BevImage bev = render_road_bev(road, kExtent, 0.05);
  const double interior = (road.lane_width - road.lane_line_width) / 2.0 - 0.15;
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (std::abs(bev.ground_at(r, c).y) <= interior) ASSERT_EQ(mask(r, c), 0);
    }
  }
}

TEST(LaneMask, AreaMatchesAnalyticCount) {
  const RoadSpec road = clean_road();
  const double mpp = 0.05;
  const Mask mask = lane_line_mask(road, kExtent, mpp);
  long count = 0;
  for (auto v : mask.data()) count += v;
  const double expected = 2.0 * road.lane_line_width * 60.0 / (mpp * mpp);
  EXPECT_NEAR(count, expected, 0.05 * expected);
}

TEST(LaneMask, EmptyBetweenTheLines) {
  const Mask mask = lane_line_mask(clean_road(), Extent{0.0, 20.0, -1.5, 1.5}, 0.05);
  for (auto v : mask.data()) ASSERT_EQ(v, 0);
}

class CompositeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    road_ = clean_road(4.05);
    extent_ = {0.0, 60.0, -4.0, 4.0};
    bev_ = render_road_bev(road_, extent_, 0.05);
    mask_ = lane_line_mask(road_, extent_, 0.05);
    placement_.start_x = 10.0;
  }

  RoadSpec road_;
  Extent extent_;
  BevImage bev_;
  Mask mask_;
  PatchPlacement placement_;
};

TEST_F(CompositeTest, AsphaltPatchIsIdentity) {
  const PatchState patch = make_uniform_patch(placement_, 0.10, road_.asphalt_intensity, 0.05,
                                              0.60, road_.asphalt_intensity);
  EXPECT_EQ(composite_patch(bev_, patch, mask_, road_).pixels, bev_.pixels);
}

TEST_F(CompositeTest, FootprintIs72By720Pixels) {
  const PatchState patch = make_uniform_patch(placement_, 0.10, 0.55, 0.05, 0.60, 0.35);
  const BevImage out = composite_patch(bev_, patch, mask_, road_);
  int rmin = out.rows(), rmax = -1, cmin = out.cols(), cmax = -1;
  long changed = 0;
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      if (out.pixels(r, c) != bev_.pixels(r, c)) {
        ++changed;
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
    }
  }
  EXPECT_EQ(changed, 72L * 720L);
  EXPECT_EQ(rmax - rmin + 1, 720);
  EXPECT_EQ(cmax - cmin + 1, 72);
  const PatchFootprint fp(bev_, mask_, patch);
  EXPECT_EQ(fp.pixel_count(), 72L * 720L);
}

TEST_F(CompositeTest, LaneLinesUntouchedAndIdempotent) {
  PatchState patch = make_uniform_patch(placement_, 0.10, 0.35, 0.05, 0.60, 0.35);
  unsigned state = 1;
  for (double& v : patch.values.data()) {
    state = state * 1103515245u + 12345u;
    v = 0.05 + 0.55 * ((state >> 8) & 0xffff) / 65535.0;
  }
  const BevImage once = composite_patch(bev_, patch, mask_, road_);
  for (int r = 0; r < once.rows(); ++r) {
    for (int c = 0; c < once.cols(); ++c) {
      if (mask_(r, c) != 0) ASSERT_EQ(once.pixels(r, c), bev_.pixels(r, c));
    }
  }
  EXPECT_EQ(composite_patch(once, patch, mask_, road_).pixels, once.pixels);
}

TEST_F(CompositeTest, PlacementOnTheLinesIsRejected) {
  placement_.center_y = 0.5;
  const PatchState patch = make_uniform_patch(placement_, 0.10, 0.35, 0.05, 0.60, 0.35);
  try {
    composite_patch(bev_, patch, mask_, road_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConstraintViolation);
    EXPECT_NE(std::string(e.what()).find("patch.placement"), std::string::npos);
  }
}

TEST_F(CompositeTest, PatchFittingOnlyWithoutMarginIsRejected) {
  const RoadSpec narrow = clean_road(3.6);
  EXPECT_THROW(validate_placement(placement_, narrow), Error);
  EXPECT_NO_THROW(validate_placement(placement_, road_));
}

TEST_F(CompositeTest, PlacementOutsideSceneIsOutOfExtent) {
  placement_.start_x = 40.0;
  const PatchState patch = make_uniform_patch(placement_, 0.10, 0.35, 0.05, 0.60, 0.35);
  try {
    composite_patch(bev_, patch, mask_, road_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfExtent);
  }
}

TEST_F(CompositeTest, PatchBoundsAreChecked) {
  PatchState patch = make_uniform_patch(placement_, 0.10, 0.35, 0.05, 0.60, 0.35);
  patch.values(3, 3) = 0.7;
  EXPECT_THROW(patch.validate(road_), Error);
  patch.values(3, 3) = 0.35;
  patch.v_max = 0.95;  // brighter than the lane lines
  EXPECT_THROW(patch.validate(road_), Error);
}

TEST_F(CompositeTest, OverlayViewMatchesComposite) {
  PatchState patch = make_uniform_patch(placement_, 0.10, 0.35, 0.05, 0.60, 0.35);
  for (int i = 0; i < patch.values.rows(); ++i) {
    for (int j = 0; j < patch.values.cols(); ++j) patch.values(i, j) = 0.05 + 0.01 * (j % 50);
  }
  const BevImage out = composite_patch(bev_, patch, mask_, road_);
  const PatchFootprint fp(bev_, mask_, patch);
  const PatchOverlay overlay = build_overlay(bev_, fp, patch);
  const SceneView view(bev_, &overlay);
  for (int r = 0; r < out.rows(); r += 3) {
    for (int c = 0; c < out.cols(); ++c) ASSERT_EQ(view.at(r, c), out.pixels(r, c));
  }
}

}  // namespace
}  // namespace drp::scene
