#pragma once

#include <random>

#include "drp/config.hpp"

namespace drp::testing {

// A straight road long enough for a few seconds at 72 km/h, patch 20 m ahead.
inline config::ScenarioConfig small_scenario(double speed_kmh = 72.0) {
  config::ScenarioConfig c;
  c.name = "unit";
  c.speed_kmh = speed_kmh;
  c.road.lane_width = 4.05;
  c.grid.x_min = -10.0;
  c.grid.length = 140.0;
  c.grid.lateral_half_extent = 52.0;
  c.patch.placement.start_x = 20.0;
  c.initial.speed = motion::kmh_to_mps(speed_kmh);
  c.road.road_length = c.grid.x_min + c.grid.length;
  return c;
}

inline GrayImage random_image(int rows, int cols, std::mt19937_64& gen, double lo = -1.0,
                              double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  GrayImage img(rows, cols, 0.0);
  for (double& v : img.data()) v = dist(gen);
  return img;
}

inline scene::PatchState random_patch(const config::ScenarioConfig& c, std::mt19937_64& gen) {
  scene::PatchState p = c.initial_patch();
  std::uniform_real_distribution<double> dist(p.v_min, p.v_max);
  for (double& v : p.values.data()) v = dist(gen);
  return p;
}

}  // namespace drp::testing
