#include "drp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace drp::sim {

SimResult run_closed_loop(const attack::LoopContext& ctx, const scene::PatchState* patch,
                          const VehicleState& s0, double duration_s, double goal,
                          const std::function<void(const camera::Frame&)>& on_frame) {
  if (!(duration_s > 0.0)) throw Error(ErrorKind::kInvalidArgument, "duration must be positive");
  if (!(goal >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "goal must be non-negative");
  const int frames = static_cast<int>(std::lround(duration_s / ctx.vehicle.dt));

  attack::RolloutOptions options;
  options.keep_tapes = false;
  options.on_frame = on_frame;
  attack::RolloutRecord rec = attack::rollout_with_patch(ctx, patch, s0, frames, options);

  SimResult out;
  out.dt = ctx.vehicle.dt;
  out.goal = goal;
  out.frames_evaluated = rec.frames_evaluated();
  out.truncated = rec.truncated;
  out.truncation_reason = rec.truncation_reason;
  out.max_lateral_deviation = rec.max_lateral_deviation();
  out.steers = rec.steers;
  out.trajectory = std::move(rec.states);

  if (patch == nullptr) {
    out.patch_entry_frame = 0;
  } else {
    for (const auto& p : rec.projections) {
      if (p.count() > 0) {
        out.patch_entry_frame = p.t - 1;
        break;
      }
    }
  }
  if (out.patch_entry_frame) {
    out.attack_time = attack_success_time(out.trajectory, out.dt, goal, *out.patch_entry_frame);
  }
  return out;
}

std::optional<double> attack_success_time(std::span<const VehicleState> trajectory, double dt,
                                          double goal, int entry_frame) {
  if (!(goal >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "goal must be non-negative");
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dt must be positive");
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const double dev = motion::lateral_deviation(trajectory[i]);
    if (dev < goal) continue;
    double t = 0.0;
    if (i > 0) {
      const double prev = motion::lateral_deviation(trajectory[i - 1]);
      const double frac = (goal - prev) / (dev - prev);
      t = (static_cast<double>(i - 1) + frac) * dt;
    }
    // A crossing before the patch is visible counts as immediate.
    return std::max(0.0, t - entry_frame * dt);
  }
  return std::nullopt;
}

void write_trajectory_csv(std::ostream& os, const SimResult& result) {
  os << "t,x,y,heading,speed,steer,lat_dev\n";
  char line[256];
  for (std::size_t i = 0; i < result.trajectory.size(); ++i) {
    const VehicleState& s = result.trajectory[i];
    const double steer = i < result.steers.size() ? result.steers[i] : 0.0;
    std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<double>(i) * result.dt, s.x, s.y, s.heading, s.speed, steer,
                  motion::lateral_deviation(s));
    os << line;
  }
}

}  // namespace drp::sim
