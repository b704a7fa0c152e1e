#pragma once

#include <span>
#include <vector>

namespace drp::motion {

// Planar pose in the road frame: x along the road, y positive left of the
// centreline, heading 0 along the road.
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;

  bool operator==(const VehicleState&) const = default;
};

struct VehicleParams {
  double wheelbase = 2.7;
  double dt = 0.05;
  double max_steer = 0.5;

  void validate() const;
};

struct StepResult {
  VehicleState state;
  double applied_steer = 0.0;
  bool clamped = false;
};

double wrap_angle(double angle);

// Forward-Euler kinematic bicycle at constant speed. Steering beyond
// max_steer is clamped and reported.
StepResult step(const VehicleState& state, double steer, const VehicleParams& params);

// States s_0..s_n for n steering commands.
std::vector<VehicleState> rollout(const VehicleState& state0, std::span<const double> steers,
                                  const VehicleParams& params);

double lateral_deviation(const VehicleState& state);

inline double kmh_to_mps(double kmh) { return kmh / 3.6; }

}  // namespace drp::motion
