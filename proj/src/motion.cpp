#include "drp/motion.hpp"

#include <cmath>
#include <numbers>

#include "drp/common.hpp"

namespace drp::motion {

void VehicleParams::validate() const {
  if (!(wheelbase > 0.0)) throw Error(ErrorKind::kInvalidArgument, "wheelbase must be positive");
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dt must be positive");
  if (!(max_steer > 0.0) || !(max_steer < std::numbers::pi / 2.0)) {
    throw Error(ErrorKind::kInvalidArgument, "max_steer must be in (0, pi/2)");
  }
}

double wrap_angle(double angle) {
  constexpr double kPi = std::numbers::pi;
  if (angle > -kPi && angle <= kPi) return angle;
  double wrapped = std::remainder(angle, 2.0 * kPi);
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

StepResult step(const VehicleState& state, double steer, const VehicleParams& params) {
  StepResult out;
  out.applied_steer = steer;
  if (std::abs(steer) > params.max_steer) {
    out.applied_steer = std::copysign(params.max_steer, steer);
    out.clamped = true;
  }
  const double v = state.speed;
  out.state.x = state.x + v * std::cos(state.heading) * params.dt;
  out.state.y = state.y + v * std::sin(state.heading) * params.dt;
  out.state.heading =
      wrap_angle(state.heading + (v / params.wheelbase) * std::tan(out.applied_steer) * params.dt);
  out.state.speed = v;
  return out;
}

std::vector<VehicleState> rollout(const VehicleState& state0, std::span<const double> steers,
                                  const VehicleParams& params) {
  params.validate();
  if (!(state0.speed >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "speed must be non-negative");
  std::vector<VehicleState> states;
  states.reserve(steers.size() + 1);
  states.push_back(state0);
  for (double steer : steers) states.push_back(step(states.back(), steer, params).state);
  return states;
}

double lateral_deviation(const VehicleState& state) { return std::abs(state.y); }

}  // namespace drp::motion
