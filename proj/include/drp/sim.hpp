#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drp/attack.hpp"

namespace drp::sim {

using motion::VehicleState;

struct SimResult {
  std::vector<VehicleState> trajectory;  // trajectory[i] at time i * dt
  std::vector<double> steers;            // steer applied after trajectory[i]
  double dt = 0.0;
  double goal = 0.745;
  double max_lateral_deviation = 0.0;
  std::optional<double> attack_time;
  // Index into trajectory of the first frame whose model input sees the patch;
  // 0 for runs without a patch.
  std::optional<int> patch_entry_frame;
  int frames_evaluated = 0;
  bool truncated = false;
  std::string truncation_reason;
};

// Closed loop for round(duration_s / dt) frames, sharing the rollout used by the
// optimizer. Detection failure truncates the run and sets `truncated`.
SimResult run_closed_loop(const attack::LoopContext& ctx, const scene::PatchState* patch,
                          const VehicleState& s0, double duration_s, double goal = 0.745,
                          const std::function<void(const camera::Frame&)>& on_frame = {});

// Seconds from trajectory[entry_frame] until |y| first reaches `goal`, with
// linear interpolation between the bracketing samples. Absent if never reached.
std::optional<double> attack_success_time(std::span<const VehicleState> trajectory, double dt,
                                          double goal, int entry_frame);

// Columns t,x,y,heading,speed,steer,lat_dev; one row per trajectory sample.
void write_trajectory_csv(std::ostream& os, const SimResult& result);

}  // namespace drp::sim
